"""Smoke test for the compiled extension.

Build first:  cargo build -p dirspeech-py --features extension-module
Or point DIRSPEECH_LIB at a built shared library.
"""

import importlib.util
import math
import os
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def find_lib():
    env = os.environ.get("DIRSPEECH_LIB")
    if env:
        return Path(env)
    for profile in ("release", "debug"):
        for name in ("libdirspeech.so", "libdirspeech.dylib", "dirspeech.dll"):
            p = ROOT / "target" / profile / name
            if p.exists():
                return p
    sys.exit("extension not built; run: cargo build -p dirspeech-py --features extension-module")


def load(lib):
    tmp = Path(tempfile.mkdtemp())
    suffix = ".pyd" if lib.suffix == ".dll" else ".so"
    dst = tmp / f"dirspeech{suffix}"
    shutil.copy(lib, dst)
    spec = importlib.util.spec_from_file_location("dirspeech", dst)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def main():
    ds = load(find_lib())

    r = ds.wer("the cat sat", "the cat sat down")
    assert r["ins"] == 1 and abs(r["wer"] - 100 / 3) < 1e-9, r

    assert ds.bleu(["the cat is on the mat"], "the cat is on the mat") == 1.0

    x = [math.sin(0.01 * i) + 0.3 * math.cos(0.37 * i) for i in range(3200)]
    y = ds.istft(ds.stft(x), len(x))
    assert max(abs(a - b) for a, b in zip(x, y)) < 1e-9

    assert ds.tag_chunk([0.5] * 160, [0.01] * 160) == "wearer"
    assert ds.tag_chunk([0.0] * 160, [0.0] * 160) == "silence"

    sot = ds.serialize_sot([("wearer", 0.0, "hello"), ("partner", 1.0, "hola")])
    runs, warnings = ds.parse_sot(sot)
    assert runs == [("wearer", "hello"), ("partner", "hola")] and not warnings

    try:
        ds.parse_sot("<x> broken", strict=True)
    except ValueError:
        pass
    else:
        raise AssertionError("strict parse accepted bad input")

    out = ds.oracle_pipeline(seed=1)
    assert out["wearer"]["wer"] == 0.0 and out["partner"]["wer"] == 0.0, out
    assert out["events"]

    print(f"ok: {len(out['events'])} events, rtf {out['real_time_factor']:.3f}")


if __name__ == "__main__":
    main()
