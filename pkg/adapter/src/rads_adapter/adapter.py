"""Stochastic-pass scoring of a pretrained sequence classifier.

Loads any dropout-equipped sequence-classification checkpoint, keeps the
dropout layers active at inference, runs K forward passes per document,
and writes one {"id", "probs": K x C} JSON line per input document plus a
sidecar report (document and truncation counts).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import torch


class AdapterError(Exception):
    """Input, model, or configuration problem; maps to exit code 2."""


@dataclass
class AdapterJob:
    model: str
    input_path: str
    output_path: str
    passes: int = 10
    max_length: int = 512
    batch_size: int = 8
    seed: int = 0
    dropout: bool = True          # False: plain eval passes (sanity mode, identical rows)
    head_dropout_only: bool = False

    def __post_init__(self):
        if self.passes < 1:
            raise AdapterError(f"passes must be >= 1, got {self.passes}")
        if self.max_length < 1 or self.batch_size < 1:
            raise AdapterError("max_length and batch_size must be positive")


@dataclass
class AdapterReport:
    documents: int
    truncated: int
    passes: int
    model: str
    warnings: list[str] = field(default_factory=list)


def read_documents(path: str) -> tuple[list[str], list[str]]:
    ids: list[str] = []
    texts: list[str] = []
    seen = set()
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise AdapterError(f"cannot read input file {path}: {e}") from e
    for lineno, raw in enumerate(lines, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as e:
            raise AdapterError(f"line {lineno}: invalid JSON ({e.msg})") from e
        if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
            raise AdapterError(f"line {lineno}: each record needs 'id' and 'text'")
        doc_id = str(obj["id"])
        if doc_id in seen:
            raise AdapterError(f"line {lineno}: duplicate id {doc_id!r}")
        seen.add(doc_id)
        ids.append(doc_id)
        texts.append(str(obj["text"]))
    if not ids:
        raise AdapterError(f"input file {path} holds no documents")
    return ids, texts


def load_model(model_id: str):
    from transformers import AutoModelForSequenceClassification, AutoTokenizer
    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModelForSequenceClassification.from_pretrained(model_id)
    except Exception as e:
        raise AdapterError(f"cannot load model {model_id!r}: {e}") from e
    return tokenizer, model


def enable_dropout(model: torch.nn.Module, head_only: bool = False) -> int:
    """Put dropout modules into train mode while the rest stays in eval.
    With ``head_only`` the encoder's dropout layers stay off and only the
    classification-head side (modules outside the base model) is stochastic.
    Returns the number of dropout modules enabled."""
    base_prefix = getattr(model, "base_model_prefix", "")
    enabled = 0
    for name, module in model.named_modules():
        if not isinstance(module, torch.nn.Dropout):
            continue
        inside_encoder = bool(base_prefix) and name.startswith(base_prefix + ".")
        if head_only and inside_encoder:
            continue
        module.train()
        enabled += 1
    return enabled


def run_adapter(job: AdapterJob) -> AdapterReport:
    ids, texts = read_documents(job.input_path)
    tokenizer, model = load_model(job.model)
    model.eval()
    report = AdapterReport(documents=len(ids), truncated=0, passes=job.passes,
                           model=job.model)
    if job.dropout:
        enabled = enable_dropout(model, head_only=job.head_dropout_only)
        if enabled == 0:
            report.warnings.append("model exposes no dropout modules; rows will be identical")
    torch.manual_seed(job.seed)

    records: list[str] = []
    with torch.no_grad():
        for start in range(0, len(ids), job.batch_size):
            batch_texts = texts[start:start + job.batch_size]
            full = tokenizer(batch_texts, truncation=False, padding=False)["input_ids"]
            report.truncated += sum(1 for seq in full if len(seq) > job.max_length)
            enc = tokenizer(batch_texts, truncation=True, padding=True,
                            max_length=job.max_length, return_tensors="pt")
            probs = torch.stack([
                torch.softmax(model(**enc).logits, dim=-1) for _ in range(job.passes)
            ])  # (K, batch, C)
            probs = probs.permute(1, 0, 2).cpu().double()
            # serialized rows must sum to 1 within the score-file tolerance
            probs = probs / probs.sum(dim=-1, keepdim=True)
            for offset, doc_id in enumerate(ids[start:start + job.batch_size]):
                records.append(json.dumps(
                    {"id": doc_id, "probs": probs[offset].tolist()}))

    out = Path(job.output_path)
    tmp = out.with_name(out.name + ".tmp")
    tmp.write_text("\n".join(records) + "\n", encoding="utf-8")
    tmp.replace(out)

    sidecar = out.with_name(out.name + ".report.json")
    sidecar.write_text(json.dumps({
        "documents": report.documents, "truncated": report.truncated,
        "passes": report.passes, "model": report.model,
        "warnings": report.warnings}, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return report
