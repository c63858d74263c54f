"""Shared fixture: a tiny randomly initialized BERT saved to disk.

Nothing is downloaded; the model is built locally with a fixed seed so
its weights are stable for the lifetime of the directory, which is what
the determinism tests rely on.
"""

import pytest
import torch
from transformers import BertConfig, BertModel, BertTokenizerFast

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "i", "have", "a", "the", "my", "today", "with", "and", "really", "bad",
    "ache", "burn", "chill", "cough", "cramp", "dizzy", "fever", "itch",
    "numb", "rash", "pain", "chest", "head", "left", "sharp",
    "##s", "##y", "##ing",
]

_gate_results = []


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("tiny-bert")
    (d / "vocab.txt").write_text("".join(t + "\n" for t in VOCAB), encoding="utf-8")
    tokenizer = BertTokenizerFast(vocab_file=str(d / "vocab.txt"), do_lower_case=True)
    tokenizer.save_pretrained(d)
    torch.manual_seed(0)
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=16,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=32,
        max_position_embeddings=64,
    )
    BertModel(config).save_pretrained(d)
    return d


def pytest_runtest_logreport(report):
    if "test_exporter_acceptance" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.rsplit("::", 1)[-1]
        _gate_results.append((name, report.outcome))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line for the exporter acceptance criterion."""
    if not _gate_results:
        return
    terminalreporter.section("exporter acceptance")
    for name, outcome in _gate_results:
        label = name.removeprefix("test_").replace("_", " ")
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{label}: {status}")
