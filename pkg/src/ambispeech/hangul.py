"""Hangul syllable decomposition and the 69-dim multi-hot character scheme.

Slot layout: 0-18 onsets, 19-39 nuclei, 40-66 codas, 67 space, 68 other.
"""

from __future__ import annotations

import numpy as np

SYLLABLE_BASE = 0xAC00
N_ONSETS = 19
N_NUCLEI = 21
N_CODAS = 27  # coda code 0 means "no coda" and has no slot

ONSET_OFFSET = 0
NUCLEUS_OFFSET = 19
CODA_OFFSET = 40
SPACE_SLOT = 67
OTHER_SLOT = 68
N_SLOTS = 69

_N_SYLLABLES = N_ONSETS * N_NUCLEI * (N_CODAS + 1)  # 11172


def decompose(ch: str) -> tuple[int | None, int | None, int | None, str]:
    """Split one character into (onset, nucleus, coda, kind).

    kind is "hangul", "space", or "other"; indices are None outside their
    kind, and coda is None for open syllables.
    """
    if len(ch) != 1:
        raise ValueError(f"decompose expects a single character, got {ch!r}")
    code = ord(ch) - SYLLABLE_BASE
    if 0 <= code < _N_SYLLABLES:
        onset = code // (N_NUCLEI * (N_CODAS + 1))
        nucleus = (code % (N_NUCLEI * (N_CODAS + 1))) // (N_CODAS + 1)
        coda = code % (N_CODAS + 1)
        return onset, nucleus, (coda - 1 if coda else None), "hangul"
    if ch.isspace():
        return None, None, None, "space"
    return None, None, None, "other"


def compose(onset: int, nucleus: int, coda: int | None = None) -> str:
    """Inverse of decompose for the hangul kind."""
    if not (0 <= onset < N_ONSETS and 0 <= nucleus < N_NUCLEI):
        raise ValueError(f"onset/nucleus out of range: {onset}, {nucleus}")
    c = 0 if coda is None else coda + 1
    if not 0 <= c <= N_CODAS:
        raise ValueError(f"coda out of range: {coda}")
    return chr(SYLLABLE_BASE + (onset * N_NUCLEI + nucleus) * (N_CODAS + 1) + c)


def char_row(ch: str) -> np.ndarray:
    """69-dim multi-hot row for one character."""
    row = np.zeros(N_SLOTS)
    onset, nucleus, coda, kind = decompose(ch)
    if kind == "hangul":
        row[ONSET_OFFSET + onset] = 1.0
        row[NUCLEUS_OFFSET + nucleus] = 1.0
        if coda is not None:
            row[CODA_OFFSET + coda] = 1.0
    elif kind == "space":
        row[SPACE_SLOT] = 1.0
    else:
        row[OTHER_SLOT] = 1.0
    return row
