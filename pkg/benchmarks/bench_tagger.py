"""Compare lexicon tagging throughput with and without numba.

Each path runs in its own interpreter because the kernel choice is fixed
at import time by CORDNER_DISABLE_NUMBA.

    python benchmarks/bench_tagger.py [--terms 5000] [--docs 300] [--repeat 3]
"""
import argparse
import hashlib
import json
import os
import subprocess
import sys
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))


def worker(args):
    from corpus import make_documents, make_vocabulary
    from cordner import _accel
    from cordner.ingest import paragraphs
    from cordner.tagger import load_vocabulary, tag_paragraph

    tsv, terms = make_vocabulary(args.terms, seed=0)
    vocab = load_vocabulary(tsv)
    refs = [r for d in make_documents(args.docs, terms, seed=0, body=(4, 12))
            for r in paragraphs(d)]
    chars = sum(len(r.text) for r in refs)

    t0 = time.perf_counter()
    vocab.compiled
    tag_paragraph(vocab, refs[0])  # first call triggers compilation or cache load
    warmup = time.perf_counter() - t0

    best = float("inf")
    for _ in range(args.repeat):
        t0 = time.perf_counter()
        out = [m for r in refs for m in tag_paragraph(vocab, r)]
        best = min(best, time.perf_counter() - t0)
    digest = hashlib.sha256(repr([(m.paper_id, m.location, m.entity) for m in out])
                            .encode()).hexdigest()[:12]
    print(json.dumps({"numba": _accel.USING_NUMBA, "paragraphs": len(refs), "chars": chars,
                      "mentions": len(out), "warmup_s": warmup, "best_s": best,
                      "digest": digest}))


def launch(args, disable):
    env = dict(os.environ, CORDNER_DISABLE_NUMBA="1" if disable else "0")
    cmd = [sys.executable, __file__, "--worker", "--terms", str(args.terms),
           "--docs", str(args.docs), "--repeat", str(args.repeat)]
    out = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--terms", type=int, default=5000)
    ap.add_argument("--docs", type=int, default=300)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.worker:
        return worker(args)

    results = {"python": launch(args, True), "numba": launch(args, False)}
    base = results["python"]
    print(f"{base['paragraphs']} paragraphs, {base['chars']} chars, "
          f"{base['mentions']} mentions, {args.terms} terms")
    print(f"{'path':<8} {'warmup s':>9} {'best s':>8} {'Mchar/s':>8}")
    for name, r in results.items():
        if name == "numba" and not r["numba"]:
            print("numba    not installed, fallback used")
            continue
        print(f"{name:<8} {r['warmup_s']:>9.3f} {r['best_s']:>8.3f} "
              f"{r['chars'] / r['best_s'] / 1e6:>8.2f}")
    if results["numba"]["numba"]:
        print(f"speedup  {base['best_s'] / results['numba']['best_s']:.1f}x")
    same = results["python"]["digest"] == results["numba"]["digest"]
    print("outputs identical" if same else "OUTPUTS DIFFER")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
