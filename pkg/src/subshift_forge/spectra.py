"""Finite-horizon spectral probes.

Weyl averages (1/N) sum a_n f_n with a_n running over unit-circle powers,
scanned over an angle grid and a ladder of prefixes. A persistent peak marks
a candidate eigenvalue of the underlying system; decay everywhere is the
finite-N face of orthogonality. These are empirical illustrations at finite
N, not verifications of any measure-theoretic statement.

Angles live in turns (fractions of a full revolution) so grid points are
exact; the exponential is evaluated at use time. The Sturmian generator
supplies the classical zero-entropy counterpoint: its eigenvalue group is
the rotation's, so peaks appear at multiples of the rotation number and
nowhere else.
"""

from fractions import Fraction

import numpy as np

from .errors import InputError
from .words import BINARY, Word


def sturmian_word(theta: float, rho: float = 0.0, N: int = 1) -> Word:
    """First N letters of the rotation coding:
    s_n = floor((n+1)*theta + rho) - floor(n*theta + rho).

    A rational theta produces an eventually periodic word; that is allowed
    here (flag it downstream via looks_rational when labeling output).
    """
    if not 0.0 < theta < 1.0:
        raise InputError("rotation number must sit strictly between 0 and 1")
    if not np.isfinite(rho):
        raise InputError("offset must be finite")
    if N < 1:
        raise InputError("need at least one letter")
    marks = np.floor(np.arange(N + 1, dtype=np.float64) * theta + rho)
    return Word(BINARY, tuple(int(d) for d in (marks[1:] - marks[:-1])))


def looks_rational(theta: float, max_den: int = 10**6) -> bool:
    """True when theta is exactly a small-denominator fraction in binary
    floating point. A metadata hint, not number theory."""
    return float(Fraction(theta).limit_denominator(max_den)) == theta


def weyl_average(series, xi_angle: float, N: int) -> complex:
    """(1/N) sum_{n<N} series[n] * e^{2 pi i * xi_angle * n}."""
    a = np.asarray(series, dtype=np.float64)
    if N < 1:
        raise InputError("average needs at least one term")
    if N > a.size:
        raise InputError("prefix passes the end of the series")
    n = np.arange(N, dtype=np.float64)
    return complex(np.mean(a[:N] * np.exp(2j * np.pi * xi_angle * n)))


class SpectralScan:
    """Magnitudes |A_N(xi)| on a uniform angle grid, per prefix."""

    def __init__(self, xi_grid, prefixes, magnitudes: np.ndarray, series_id: str):
        self.xi_grid = tuple(float(x) for x in xi_grid)
        self.prefixes = tuple(int(N) for N in prefixes)
        self.magnitudes = magnitudes  # shape (len(xi_grid), len(prefixes))
        self.series_id = series_id

    def magnitude(self, angle_index: int, prefix_index: int) -> float:
        return float(self.magnitudes[angle_index, prefix_index])

    def peak_angle(self, prefix_index: int = -1) -> float:
        return self.xi_grid[int(np.argmax(self.magnitudes[:, prefix_index]))]

    def to_json_dict(self) -> dict:
        return {
            "kind": "spectral-scan",
            "series_id": self.series_id,
            "xi_grid": list(self.xi_grid),
            "prefixes": list(self.prefixes),
            "magnitudes": [[float(m) for m in row] for row in self.magnitudes],
        }

    def write_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["angle", "N", "magnitude"])
            for j, angle in enumerate(self.xi_grid):
                for i, N in enumerate(self.prefixes):
                    w.writerow([repr(angle), N, repr(float(self.magnitudes[j, i]))])


def spectral_scan(series, grid_size: int, prefixes, series_id: str = "series",
                  extra_angles=(), workers: int = 1) -> SpectralScan:
    """Weyl averages on the grid j/grid_size (plus any extra angles, appended
    after the grid) across the given prefixes.

    Grid points are independent; workers > 1 fans them out over threads with
    assembly by index, so the result never depends on the worker count."""
    a = np.asarray(series, dtype=np.float64)
    if grid_size < 1:
        raise InputError("grid needs at least one angle")
    prefixes = [int(N) for N in prefixes]
    if not prefixes:
        raise InputError("need at least one prefix")
    if any(N < 1 or N > a.size for N in prefixes):
        raise InputError("prefixes must lie inside the series")
    angles = [j / grid_size for j in range(grid_size)]
    for x in extra_angles:
        x = float(x)
        if not 0.0 <= x < 1.0:
            raise InputError("extra angles must lie in [0, 1)")
        angles.append(x)
    top = max(prefixes)
    n = np.arange(top, dtype=np.float64)
    head = a[:top]

    def column(angle: float) -> list[float]:
        running = np.cumsum(head * np.exp(2j * np.pi * angle * n))
        return [abs(running[N - 1]) / N for N in prefixes]

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(column, angles))
    else:
        rows = [column(angle) for angle in angles]
    mags = np.asarray(rows, dtype=np.float64)
    return SpectralScan(angles, prefixes, mags, series_id)
