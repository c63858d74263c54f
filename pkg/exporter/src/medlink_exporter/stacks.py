"""Writer for the LayerStack text interchange format.

Header line `N L d`, then per record a key line followed by L rows of d
space-separated floats. Floats are rendered with repr (the shortest
string that round-trips exactly) and records are written in sorted key
order, so a consumer-side load/re-serialize cycle is byte-stable and
two runs with identical inputs produce identical bytes.
"""

import numpy as np


def fmt_float(x):
    return repr(float(x))


def write_layer_stacks(path, stacks, num_layers=None, dim=None):
    """Write key -> (L, d) arrays; shape defaults come from the records.

    Explicit num_layers/dim let an empty export still declare its shape
    in the header.
    """
    items = sorted(stacks.items())
    if items:
        first = np.asarray(items[0][1])
        num_layers, dim = first.shape
    elif num_layers is None or dim is None:
        raise ValueError("empty export needs explicit num_layers and dim")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(items)} {num_layers} {dim}\n")
        for key, layers in items:
            layers = np.asarray(layers, dtype=np.float64)
            if layers.shape != (num_layers, dim):
                raise ValueError(
                    f"stack {key!r} has shape {layers.shape}, expected {(num_layers, dim)}"
                )
            if not np.isfinite(layers).all():
                raise ValueError(f"stack {key!r} contains non-finite values")
            fh.write(key + "\n")
            for row in layers:
                fh.write(" ".join(fmt_float(v) for v in row) + "\n")
