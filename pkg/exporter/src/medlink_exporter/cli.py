"""Command-line entry point for the feature exporter."""

import argparse
import logging
import os
import sys

from medlink_exporter.export import KINDS, ExportJob, export_label_stacks, export_mention_stacks

log = logging.getLogger("medlink_exporter")


class Parser(argparse.ArgumentParser):
    """Usage errors exit 1; 2 is reserved for unexpected failures."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def parse_layers(text):
    if text == "all":
        return None
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected 'all' or comma-separated integers, got {text!r}"
        )


def build_parser():
    parser = Parser(
        prog="medlink-export",
        description="Run a frozen transformer over mentions or concept labels "
                    "and write per-layer term embeddings as LayerStack text.",
    )
    parser.add_argument("--model", required=True,
                        help="model name or local path (anything AutoModel loads)")
    parser.add_argument("--input", required=True,
                        help="corpus TSV for mentions, concepts TSV for labels")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--layers", type=parse_layers, default=None,
                        help="comma-separated 1-based encoder layers (default: all)")
    parser.add_argument("--max-len", type=int, default=64,
                        help="max sequence length; longer sentences are truncated "
                             "around the term span (default: 64)")
    parser.add_argument("--out", required=True, help="output LayerStack file")
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s",
                        stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code or 0
    try:
        if not os.path.isfile(args.input):
            raise FileNotFoundError(f"--input file not found: {args.input}")
        job = ExportJob(model=args.model, input=args.input, kind=args.kind,
                        out=args.out, layers=args.layers, max_len=args.max_len)
        if job.kind == "mentions":
            export_mention_stacks(job)
        else:
            export_label_stacks(job)
    except (FileNotFoundError, ValueError) as exc:
        log.error("%s", exc)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        log.error("unexpected failure: %s", exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
