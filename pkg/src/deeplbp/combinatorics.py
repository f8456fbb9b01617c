"""Size of the binarization-function search space.

Counts labelled DAGs with Robinson's recurrence over the code space of each
LBP variant and renders the counts as ``d·10^e`` with a truncated mantissa.
"""

from __future__ import annotations

from math import comb, gcd

VARIANTS = ("rotation-invariant", "uniform", "traditional")

_dag_cache = [1]


def dag_count(m: int) -> int:
    """Number of labelled directed acyclic graphs on ``m`` nodes."""
    if m < 0:
        raise ValueError("node count must be non-negative")
    a = _dag_cache
    for n in range(len(a), m + 1):
        total = 0
        for k in range(1, n + 1):
            term = comb(n, k) * a[n - k] << (k * (n - k))
            total += term if k % 2 else -term
        a.append(total)
    return a[m]


def _phi(d: int) -> int:
    return sum(1 for i in range(1, d + 1) if gcd(i, d) == 1)


def necklaces(n: int) -> int:
    """Binary necklaces of length ``n``: rotation classes of n-bit codes."""
    return sum(_phi(d) << (n // d) for d in range(1, n + 1) if n % d == 0) // n


def code_space_size(n: int, variant: str) -> int:
    if not 2 <= n <= 16:
        raise ValueError(f"n must lie in [2, 16], got {n}")
    if variant == "traditional":
        return 1 << n
    if variant == "rotation-invariant":
        return necklaces(n)
    if variant == "uniform":
        return n * (n - 1) + 3
    raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")


def decimal_exponent(x: int) -> int:
    """``floor(log10(x))`` computed exactly for a positive integer."""
    if x <= 0:
        raise ValueError("need a positive integer")
    e = max(int((x.bit_length() - 1) * 0.30102999566398114) - 1, 0)
    p = 10 ** e
    while p * 10 <= x:
        p *= 10
        e += 1
    return e


def scientific(x: int) -> tuple[int, int]:
    """Truncated leading digit and decimal exponent."""
    e = decimal_exponent(x)
    return x // 10 ** e, e


def format_count(x: int, style: str = "unicode") -> str:
    d, e = scientific(x)
    return f"{d}·10^{e}" if style == "unicode" else f"{d}e{e}"


def table1(n_range=range(2, 9)) -> list[dict]:
    """Rows of ``{"n", variant: (mantissa, exponent), ...}``."""
    rows = []
    for n in n_range:
        if not 2 <= n <= 8:
            raise ValueError(f"table rows cover 2 <= n <= 8, got {n}")
        row = {"n": n}
        for variant in VARIANTS:
            row[variant] = scientific(dag_count(code_space_size(n, variant)))
        rows.append(row)
    return rows


def render_table(rows, fmt: str = "text") -> str:
    header = ["neighbors", *VARIANTS]
    cells = [[str(r["n"])] + [f"{r[v][0]}·10^{r[v][1]}" for v in VARIANTS] for r in rows]
    if fmt == "csv":
        return "\n".join(",".join(line) for line in [header, *cells]) + "\n"
    widths = [max(len(x) for x in col) for col in zip(header, *cells)]
    lines = ["  ".join(x.rjust(w) for x, w in zip(line, widths)) for line in [header, *cells]]
    return "\n".join(lines) + "\n"
