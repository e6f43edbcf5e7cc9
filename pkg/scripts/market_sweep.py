"""Random admissible markets: worst violation of each order relation."""

import argparse
import time

import numpy as np

from nestedsearch.pricing import hazard_dominance_gap, p_dagger, p_hat, p_star, random_market


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--markets", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    worst = {"sigma >= sigma_hat": -np.inf, "hazard dominance": -np.inf, "p* <= p_hat": -np.inf,
             "p* <= p_dagger": -np.inf}
    start = time.perf_counter()
    for _ in range(args.markets):
        m = random_market(rng)
        ps = p_star(m)
        for k, v in zip(worst, (m.sigma_hat - m.sigma, -hazard_dominance_gap(m), ps - p_hat(m), ps - p_dagger(m))):
            worst[k] = max(worst[k], v)
    for k, v in worst.items():
        print(f"{k:>20}: worst violation {v:+.3e}")
    print(f"{args.markets} markets in {time.perf_counter() - start:.1f}s")


if __name__ == "__main__":
    main()
