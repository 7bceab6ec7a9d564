"""
Checking the hand-written backward pass
=======================================

Compare analytic gradients of the full unrolled tracker with central
finite differences on a tiny configuration.
"""
from lidarbeam.cli import gradcheck_report
from lidarbeam.config import RunConfig

report = gradcheck_report(RunConfig().validate())
for mode, errs in report.items():
    worst = max(errs, key=errs.get)
    print(f"{mode:8s} worst group {worst:18s} relative error {errs[worst]:.2e}")
