"""Built-in simulation presets."""

from __future__ import annotations

from .model import TMarSpec


def preset_spec(name: str) -> TMarSpec:
    if name == "paper-sec4":
        # three-component benchmark process: tMAR(3; 2, 1, 1)
        return TMarSpec(
            weights=[0.4, 0.4, 0.2],
            means=[0.0, 0.0, 0.0],
            ar_coeffs=[[-0.5, 0.5], [1.1], [-0.4]],
            scales=[5.0, 3.0, 1.0],
            dofs=[4.0, 14.0, 10.0],
        )
    if name == "ar1":
        return TMarSpec(
            weights=[1.0],
            means=[0.0],
            ar_coeffs=[[0.5]],
            scales=[1.0],
            dofs=[10.0],
        )
    raise ValueError(f"unknown preset {name!r}")
