"""Shared store for acceptance-criterion verdict lines."""

LINES = []


def record(label: str, passed: bool, detail: str) -> bool:
    line = f"{'PASS' if passed else 'FAIL'}  {label}: {detail}"
    LINES.append(line)
    print(line)
    return passed
