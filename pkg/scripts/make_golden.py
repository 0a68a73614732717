"""Regenerate tests/data/golden_zero_message.npy (transmit waveform of the all-zero message)."""

from pathlib import Path

import numpy as np

from nnbicm.pipelines import Link, SystemConfig, tx_frame

GOLDEN_CFG = SystemConfig(N=64, M=4, psi_db=60.0, interleaver="identity")

if __name__ == "__main__":
    link = Link(GOLDEN_CFG)
    tx = tx_frame(np.zeros(link.code.k, dtype=np.int8), GOLDEN_CFG, rng_seed=1, link=link)
    out = Path(__file__).resolve().parents[1] / "tests" / "data" / "golden_zero_message.npy"
    np.save(out, tx.time_signal[0])
    print(out, tx.time_signal.shape)
