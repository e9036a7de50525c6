"""Deterministic seed derivation: one master seed fans out to stages,
classes, and groups through a fixed hash, so every consumer sees a
stable stream regardless of evaluation order."""

import hashlib


def derive_seed(master: int, *labels: object) -> int:
    text = str(int(master)) + "".join(f"|{lab}" for lab in labels)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")
