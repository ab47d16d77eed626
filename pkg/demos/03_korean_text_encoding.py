"""
Korean text as model input
==========================

Transcripts enter the models character by character. Each Hangul
syllable decomposes into onset, nucleus, and optional coda by Unicode
arithmetic, and those indices drive a sparse indicator encoding. A dense
alternative looks characters up in a word-vector table.
"""

import numpy as np

from ambispeech import (EmbeddingTable, char_row, compose, decompose,
                        encode_dense, encode_sparse)

# Decomposition is pure arithmetic on the code point.
for ch in "간이 아픈가":
    onset, nucleus, coda, kind = decompose(ch)
    print(f"{ch!r}: kind={kind} onset={onset} nucleus={nucleus} coda={coda}")

# compose() is the exact inverse on the syllable block.
print("compose(0, 0, 3) =", compose(0, 0, 3))
assert compose(*decompose("간")[:3]) == "간"

# One character becomes one sparse row: indicator slots for onset,
# nucleus, coda, space, and anything else.
row = char_row("간")
print(f"sparse row for '간': dim {row.shape[0]}, hot slots {np.flatnonzero(row)}")
print(f"sparse row for ' ': hot slots {np.flatnonzero(char_row(' '))}")

# A transcript becomes an end-aligned sequence of such rows. Padding
# sits at the front so the final character is always the last valid row.
seq = encode_sparse("가나까", t_max=6)
print(f"encoded '가나까': shape {seq.data.shape}, valid rows {seq.valid_len}, "
      f"mask {seq.mask.astype(int)}")

# The dense mode swaps indicator rows for learned vectors; characters
# missing from the table read as zeros.
table = EmbeddingTable({"가": np.array([1.0, 0.5]), "나": np.array([-0.5, 1.0])}, 2)
dense = encode_dense("가나까", table, t_max=4)
print("dense rows:\n", dense.valid_rows())
