"""Savings as storage grows from half an hour to two hours of peak load.

    python3 demos/battery_sweep.py
"""

from eass.sim import SimConfig, forecast_horizon, sweep, sweep_csv
from eass.synth import SyntheticSpec, generate_synthetic


def main():
    config = SimConfig(eval_days=7)
    dataset = generate_synthetic(SyntheticSpec(n_transformers=5, days=config.warmup_days + 7, seed=3))
    forecasts = forecast_horizon(dataset, config.warmup_days, config.forecast)
    rows = sweep(config, dataset, "battery_hours", [0.5, 1.0, 1.5, 2.0], forecasts)
    print(sweep_csv(rows), end="")


if __name__ == "__main__":
    main()
