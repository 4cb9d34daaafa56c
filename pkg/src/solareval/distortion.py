"""DTW alignment and temporal distortion statistics (TDI, TDM).

Path cells ``(i, j)`` pair test index ``i`` with reference index ``j``. A cell
with ``i > j`` means the test reproduces an earlier reference value, i.e. it is
late; ``i < j`` counts as in advance.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .series import AlignedPair, minmax_normalize


@dataclass(frozen=True)
class WarpPath:
    steps: np.ndarray  # shape (k, 2), columns (i, j)
    cost: float

    @property
    def n(self) -> int:
        return int(self.steps[-1, 0]) + 1


@dataclass(frozen=True)
class DistortionReport:
    tdi: float       # percent
    tdi_adv: float   # percent
    tdi_late: float  # percent
    tdm: float

    def as_dict(self) -> dict:
        return {"tdi": self.tdi, "tdi_adv": self.tdi_adv,
                "tdi_late": self.tdi_late, "tdm": self.tdm}


def dtw_path(test_norm, ref_norm) -> WarpPath:
    """Minimum-cost monotone path under steps (1,0), (0,1), (1,1) with cost ``|T_i - R_j|``.

    Ties prefer the diagonal predecessor, then ``(i-1, j)``, then ``(i, j-1)``.
    """
    a = np.asarray(test_norm, dtype=np.float64)
    b = np.asarray(ref_norm, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("DTW inputs must be 1-D arrays of equal length")
    n = a.size
    if n < 2:
        raise ValueError("DTW needs at least two points")

    cost = np.abs(a[:, None] - b[None, :]).tolist()
    inf = float("inf")
    acc = [[inf] * n for _ in range(n)]
    move = [[0] * n for _ in range(n)]  # 0 diag, 1 from (i-1,j), 2 from (i,j-1)

    row0 = acc[0]
    c0 = cost[0]
    row0[0] = c0[0]
    for j in range(1, n):
        row0[j] = row0[j - 1] + c0[j]
        move[0][j] = 2
    for i in range(1, n):
        prev = acc[i - 1]
        cur = acc[i]
        ci = cost[i]
        mv = move[i]
        cur[0] = prev[0] + ci[0]
        mv[0] = 1
        left = cur[0]
        for j in range(1, n):
            best = prev[j - 1]
            k = 0
            up = prev[j]
            if up < best:
                best, k = up, 1
            if left < best:
                best, k = left, 2
            left = best + ci[j]
            cur[j] = left
            mv[j] = k

    i = j = n - 1
    steps = [(i, j)]
    while i or j:
        k = move[i][j]
        if k == 0:
            i -= 1
            j -= 1
        elif k == 1:
            i -= 1
        else:
            j -= 1
        steps.append((i, j))
    steps.reverse()
    return WarpPath(np.array(steps, dtype=np.int64), float(acc[n - 1][n - 1]))


def path_areas(path: WarpPath) -> tuple[float, float, int]:
    """Raw (late, advance) areas of a path and its series length."""
    d = path.steps[:, 0] - path.steps[:, 1]
    late = float(d[d > 0].sum())
    adv = float(-d[d < 0].sum())
    return late, adv, path.n


def _mix(late: float, adv: float) -> float:
    total = late + adv
    if total == 0:
        return 0.0
    return 2.0 * late / total - 1.0


def tdi_tdm(path: WarpPath) -> DistortionReport:
    """Distortion areas normalised by the area under the identity path, ``n(n-1)/2``."""
    late, adv, n = path_areas(path)
    norm = n * (n - 1) / 2.0
    tdi_late = 100.0 * late / norm
    tdi_adv = 100.0 * adv / norm
    return DistortionReport(tdi_late + tdi_adv, tdi_adv, tdi_late, _mix(late, adv))


def sequence_distortion(pair: AlignedPair) -> DistortionReport:
    """Normalise both sides independently to [0, 1], align with DTW, and measure distortion."""
    return tdi_tdm(sequence_path(pair))


def sequence_path(pair: AlignedPair) -> WarpPath:
    if len(pair) < 2:
        raise ValueError("sequence distortion needs at least two points")
    return dtw_path(minmax_normalize(pair.test), minmax_normalize(pair.reference))


@dataclass(frozen=True)
class DistortionSummary:
    """Aggregate over many sequences.

    ``tdi`` is the mean of per-sequence TDI; ``tdm`` comes from the pooled late
    and advance areas. The per-sequence mean of TDM is kept alongside.
    """

    tdi: float
    tdi_adv: float
    tdi_late: float
    tdm: float
    tdm_mean: float
    tdi_pooled: float
    n_sequences: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def summarize(reports: list[DistortionReport]) -> DistortionSummary:
    if not reports:
        nan = float("nan")
        return DistortionSummary(nan, nan, nan, nan, nan, nan, 0)
    k = len(reports)
    late = sum(r.tdi_late for r in reports)
    adv = sum(r.tdi_adv for r in reports)
    return DistortionSummary(
        tdi=sum(r.tdi for r in reports) / k,
        tdi_adv=adv / k,
        tdi_late=late / k,
        tdm=_mix(late, adv),
        tdm_mean=sum(r.tdm for r in reports) / k,
        tdi_pooled=(late + adv) / k,
        n_sequences=k,
    )
