"""Regenerate the bundled alist files under src/nnbicm/codes/.

Base matrices are the IEEE 802.11n rate-1/2 LDPC prototypes (24 block
columns, lifting sizes 54 and 81).
"""

from pathlib import Path

import numpy as np

from nnbicm.ldpc import expand_prototype, format_alist

_ = -1

PROTO_1296_R12 = [
    [40, _, _, _, 22, _, 49, 23, 43, _, _, _, 1, 0, _, _, _, _, _, _, _, _, _, _],
    [50, 1, _, _, 48, 35, _, _, 13, _, 30, _, _, 0, 0, _, _, _, _, _, _, _, _, _],
    [39, 50, _, _, 4, _, 2, _, _, _, _, 49, _, _, 0, 0, _, _, _, _, _, _, _, _],
    [33, _, _, 38, 37, _, _, 4, 1, _, _, _, _, _, _, 0, 0, _, _, _, _, _, _, _],
    [45, _, _, _, 0, 22, _, _, 20, 42, _, _, _, _, _, _, 0, 0, _, _, _, _, _, _],
    [51, _, _, 48, 35, _, _, _, 44, _, 18, _, _, _, _, _, _, 0, 0, _, _, _, _, _],
    [47, 11, _, _, _, 17, _, _, 51, _, _, _, 0, _, _, _, _, _, 0, 0, _, _, _, _],
    [5, _, 25, _, 6, _, 45, _, 13, 40, _, _, _, _, _, _, _, _, _, 0, 0, _, _, _],
    [33, _, _, 34, 24, _, _, _, 23, _, _, 46, _, _, _, _, _, _, _, _, 0, 0, _, _],
    [1, _, 27, _, 1, _, _, _, 38, _, 44, _, _, _, _, _, _, _, _, _, _, 0, 0, _],
    [_, 18, _, _, 23, _, _, 8, 0, 35, _, _, _, _, _, _, _, _, _, _, _, _, 0, 0],
    [49, _, 17, _, 30, _, _, _, 34, _, _, 19, 1, _, _, _, _, _, _, _, _, _, _, 0],
]

PROTO_1944_R12 = [
    [57, _, _, _, 50, _, 11, _, 50, _, 79, _, 1, 0, _, _, _, _, _, _, _, _, _, _],
    [3, _, 28, _, 0, _, _, _, 55, 7, _, _, _, 0, 0, _, _, _, _, _, _, _, _, _],
    [30, _, _, _, 24, 37, _, _, 56, 14, _, _, _, _, 0, 0, _, _, _, _, _, _, _, _],
    [62, 53, _, _, 53, _, _, 3, 35, _, _, _, _, _, _, 0, 0, _, _, _, _, _, _, _],
    [40, _, _, 20, 66, _, _, 22, 28, _, _, _, _, _, _, _, 0, 0, _, _, _, _, _, _],
    [0, _, _, _, 8, _, 42, _, 50, _, _, 8, _, _, _, _, _, 0, 0, _, _, _, _, _],
    [69, 79, 79, _, _, _, 56, _, 52, _, _, _, 0, _, _, _, _, _, 0, 0, _, _, _, _],
    [65, _, _, _, 38, 57, _, _, 72, _, 27, _, _, _, _, _, _, _, _, 0, 0, _, _, _],
    [64, _, _, _, 14, 52, _, _, 30, _, _, 32, _, _, _, _, _, _, _, _, 0, 0, _, _],
    [_, 45, _, 70, 0, _, _, _, 77, 9, _, _, _, _, _, _, _, _, _, _, _, 0, 0, _],
    [2, 56, _, 57, 35, _, _, _, _, _, 12, _, _, _, _, _, _, _, _, _, _, _, 0, 0],
    [24, _, 61, _, 60, _, _, 27, 51, _, _, 16, 1, _, _, _, _, _, _, _, _, _, _, 0],
]

HAMMING_7_4 = [
    [1, 1, 0, 1, 1, 0, 0],
    [1, 0, 1, 1, 0, 1, 0],
    [0, 1, 1, 1, 0, 0, 1],
]


def main() -> None:
    out = Path(__file__).resolve().parents[1] / "src" / "nnbicm" / "codes"
    out.mkdir(parents=True, exist_ok=True)
    (out / "80211n_1296_r12.alist").write_text(format_alist(expand_prototype(PROTO_1296_R12, 54)))
    (out / "80211n_1944_r12.alist").write_text(format_alist(expand_prototype(PROTO_1944_R12, 81)))
    (out / "hamming_7_4.alist").write_text(format_alist(np.array(HAMMING_7_4)))


if __name__ == "__main__":
    main()
