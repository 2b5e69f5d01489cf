"""Shared comparison helpers for the test suite."""
import math


def digit_unit(ref: float, digits: int) -> float:
    """One unit in the ``digits``-th significant digit of ``ref``."""
    if ref == 0:
        return 10.0 ** (1 - digits)
    return 10.0 ** (math.floor(math.log10(abs(ref))) - digits + 1)


def agrees_to_digits(value: float, ref: float, digits: int) -> bool:
    """True when ``value`` matches a table entry printed with ``digits`` significant digits.

    Published tables mix rounding and truncation, so a difference of up to
    one unit in the last printed digit is accepted.
    """
    return abs(value - ref) <= digit_unit(ref, digits) * (1 + 1e-12)


def rel_err(value: float, ref: float) -> float:
    return abs(value - ref) / abs(ref)


# Acceptance criteria report one line per part; the terminal summary joins
# the parts of each criterion into a single PASS/FAIL line.
ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


def report(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE.setdefault(criterion, []).append((bool(ok), detail))
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")


def acceptance_lines() -> list[str]:
    lines = []
    for n in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[n]
        ok = all(p for p, _ in parts)
        lines.append(f"criterion {n}: {'PASS' if ok else 'FAIL'} - " + "; ".join(d for _, d in parts))
    return lines
