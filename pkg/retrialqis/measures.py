"""
Names of the reported measures, shared by the analytic and the simulated reports.

:author: Athanasios Anastasiou
:date: Oct 2026
"""

MEASURES = tuple(f"L{k}" for k in range(1, 17))
REPORT_COLUMNS = MEASURES + ("L9_uniform", "ETC")


def ratio(numerator, denominator):
    """
    ``numerator / denominator``, or None (undefined) when the denominator vanishes.
    """
    if denominator == 0:
        return None
    return numerator / denominator
