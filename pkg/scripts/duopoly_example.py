"""Uniform two-stage example: thresholds, monopolistic prices, and duopoly candidates."""

import argparse

from nestedsearch.dist import UniformInterval
from nestedsearch.pricing import BENCHMARK, STAGE1, MarketModel, duopoly_fixed_point, equilibrium_report


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cx", type=float, default=0.05)
    ap.add_argument("--cy", type=float, default=0.1)
    args = ap.parse_args()
    u = UniformInterval(0.0, 1.0)
    rep = equilibrium_report(MarketModel(u, u, args.cx, args.cy))
    for k, v in rep.as_dict().items():
        print(f"{k:>18}: {v}")
    duo = MarketModel(u, u, args.cx, args.cy, n=2)
    for regime in (STAGE1, BENCHMARK):
        res = duopoly_fixed_point(duo, regime)
        print(f"duopoly {regime:>9}: price {res.price:.6f}  residual {res.residual:.1e}  "
              f"profit slope {res.profit_slope:+.4f}  best response {res.best_response:.4f}  ({res.label})")


if __name__ == "__main__":
    main()
