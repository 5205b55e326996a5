"""How the budget of uncertainty trades savings against realized adjustments.

A larger budget reserves more headroom around the forecast, so fewer
planned charge or discharge amounts have to be clipped when actual loads
arrive. Whether realized savings rise or fall with the budget depends on
how much the clipped plans lose compared with the headroom held back.

    python3 demos/robust_budget.py
"""

from eass.sim import Policy, SimConfig, forecast_horizon, run_horizon
from eass.synth import SyntheticSpec, generate_synthetic

BUDGETS = (0, 5, 15, 50, 288)


def main():
    base = SimConfig(eval_days=14)
    dataset = generate_synthetic(SyntheticSpec(n_transformers=5, days=base.warmup_days + 14, seed=2))
    forecasts = forecast_horizon(dataset, base.warmup_days, base.forecast)
    print(f"{'budget':>8s} {'savings %':>9s} {'adjustments':>12s}")
    for gamma in BUDGETS:
        policy = Policy.robust(float(gamma))
        report = run_horizon(SimConfig(policies=(policy,), eval_days=14), dataset, forecasts)
        s = report.summaries[policy.label]
        print(f"{gamma:8d} {s.savings_pct:9.2f} {s.adjustments:12d}")


if __name__ == "__main__":
    main()
