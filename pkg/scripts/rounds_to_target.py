"""Rounds needed to reach the benchmark target loss, FedAvg versus FedSUMM, per seed."""

import argparse

from fedsumm.benchmarks import ConceptShiftBenchmark, rounds_to_target


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--epsilons", type=float, nargs="+", default=[0.01, 0.1])
    args = ap.parse_args(argv)

    wins = {e: 0 for e in args.epsilons}
    print("seed,target,fedavg," + ",".join(f"fedsumm_eps={e}" for e in args.epsilons))
    for seed in range(args.seeds):
        bench = ConceptShiftBenchmark(seed=seed)
        parts = bench.partitions()
        target = bench.target_loss(parts)
        avg = rounds_to_target(bench.run("fedavg", parts=parts), target)
        row = [seed, f"{target:.6f}", avg]
        for e in args.epsilons:
            summ = rounds_to_target(bench.run("fedsumm", e, parts=parts), target)
            wins[e] += summ is not None and (avg is None or summ <= avg)
            row.append(summ)
        print(",".join("" if v is None else str(v) for v in row))
    for e, w in wins.items():
        print(f"# eps={e}: fedsumm no slower on {w}/{args.seeds} seeds")


if __name__ == "__main__":
    main()
