"""Training-data curation: the area/loss/aesthetic filter cascade, the
preference-pair decision rule, the preference-pair manifest and the DPO
objective as plain numerics.

Learned scores (test losses, aesthetic scores) enter through score tables
read from files; no model is run here.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, StructureError
from .mesh import Mesh, mesh_area


@dataclass(frozen=True)
class CurationConfig:
    area_min: float = 1.0
    loss_threshold: float | None = None
    aesthetic_keep_fraction: float = 0.2
    face_min: int = 5000
    cd_threshold: float | None = None

    def __post_init__(self):
        if not 0.0 < self.aesthetic_keep_fraction <= 1.0:
            raise ConfigError("aesthetic_keep_fraction must be in (0, 1]")
        if self.area_min < 0:
            raise ConfigError("area_min must be nonnegative")
        if self.loss_threshold is not None and self.loss_threshold < 0:
            raise ConfigError("loss_threshold must be nonnegative")
        if self.cd_threshold is not None and self.cd_threshold <= 0:
            raise ConfigError("cd_threshold must be positive")


@dataclass(frozen=True)
class ScoreTable:
    """Mesh id -> scalar score, labeled by what produced the scores."""

    scores: dict[str, float]
    label: str = ""

    @classmethod
    def load(cls, path: str | Path, label: str = "") -> "ScoreTable":
        scores: dict[str, float] = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise StructureError(f"line {lineno}: expected '<id> <float>'")
            sid, raw = parts
            if sid in scores:
                raise StructureError(f"line {lineno}: duplicate id {sid!r}")
            try:
                scores[sid] = float(raw)
            except ValueError:
                raise StructureError(f"line {lineno}: bad score {raw!r}") from None
        return cls(scores, label or Path(path).stem)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            "".join(f"{sid} {score!r}\n" for sid, score in self.scores.items())
        )

    def __getitem__(self, sid: str) -> float:
        return self.scores[sid]

    def __contains__(self, sid: str) -> bool:
        return sid in self.scores


REASON_AREA = "area"
REASON_LOSS = "loss"


def run_filter_cascade(
    meshes: list[tuple[str, Mesh]],
    losses: ScoreTable,
    aesthetics: ScoreTable,
    cfg: CurationConfig,
) -> tuple[list[str], list[tuple[str, str]]]:
    """Apply the filter stages in order; returns (kept ids, dropped ids with
    the reason that removed them).

    Stage order: drop meshes with surface area below ``area_min``; flag the
    survivors whose test loss exceeds ``loss_threshold``; rescue the top
    ``aesthetic_keep_fraction`` of the flagged ids by aesthetic score (ties
    at the cut kept) and drop the rest.
    """
    if cfg.loss_threshold is None:
        raise ConfigError("loss_threshold is required for the filter cascade")

    kept: list[str] = []
    dropped: list[tuple[str, str]] = []
    survivors: list[str] = []
    for sid, mesh in meshes:
        if mesh_area(mesh) < cfg.area_min:
            dropped.append((sid, REASON_AREA))
        else:
            survivors.append(sid)

    missing = [sid for sid in survivors if sid not in losses]
    if missing:
        raise ConfigError(f"loss scores missing for ids: {', '.join(missing)}")

    flagged = [sid for sid in survivors if losses[sid] > cfg.loss_threshold]
    missing = [sid for sid in flagged if sid not in aesthetics]
    if missing:
        raise ConfigError(f"aesthetic scores missing for ids: {', '.join(missing)}")

    rescued: set[str] = set()
    if flagged:
        keep_n = int(len(flagged) * cfg.aesthetic_keep_fraction)
        if keep_n > 0:
            ranked = sorted(flagged, key=lambda sid: -aesthetics[sid])
            cut = aesthetics[ranked[keep_n - 1]]
            rescued = {sid for sid in flagged if aesthetics[sid] >= cut}

    for sid in survivors:
        if sid in flagged and sid not in rescued:
            dropped.append((sid, REASON_LOSS))
        else:
            kept.append(sid)
    return kept, dropped


class PairOutcome(str, Enum):
    DISCARD_BOTH = "discard_both"
    PREFER_FIRST = "prefer_first"
    PREFER_SECOND = "prefer_second"
    NEEDS_HUMAN = "needs_human"


@dataclass(frozen=True)
class PairDecision:
    outcome: PairOutcome
    rationale: str


def decide_pair(cd_first: float, cd_second: float, threshold: float) -> PairDecision:
    """Gate a candidate pair on geometric fidelity.

    Both distances above the threshold: discard. Exactly one within it: that
    mesh is preferred. Both within it: the call goes to a human annotator.
    """
    if cd_first < 0 or cd_second < 0:
        raise DomainError("chamfer distances must be nonnegative")
    if threshold <= 0:
        raise DomainError("threshold must be positive")
    first_ok = cd_first <= threshold
    second_ok = cd_second <= threshold
    if not first_ok and not second_ok:
        return PairDecision(PairOutcome.DISCARD_BOTH, "both above threshold")
    if first_ok and not second_ok:
        return PairDecision(PairOutcome.PREFER_FIRST, "only first within threshold")
    if second_ok and not first_ok:
        return PairDecision(PairOutcome.PREFER_SECOND, "only second within threshold")
    return PairDecision(PairOutcome.NEEDS_HUMAN, "both within threshold")


# ---------------------------------------------------------------------------
# DPO objective
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DpoBatch:
    """Per-pair summed log-probabilities under the policy and the frozen
    reference, for the preferred and dispreferred samples."""

    policy_preferred: np.ndarray
    policy_dispreferred: np.ndarray
    reference_preferred: np.ndarray
    reference_dispreferred: np.ndarray
    beta: float = 0.1

    def __post_init__(self):
        arrays = {}
        for name in (
            "policy_preferred",
            "policy_dispreferred",
            "reference_preferred",
            "reference_dispreferred",
        ):
            arr = np.asarray(getattr(self, name), dtype=np.float64).ravel()
            arrays[name] = arr
            object.__setattr__(self, name, arr)
        sizes = {len(a) for a in arrays.values()}
        if len(sizes) != 1:
            raise DomainError("log-probability arrays must have equal length")
        if next(iter(sizes)) == 0:
            raise DomainError("batch must contain at least one pair")
        for name, arr in arrays.items():
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} contains non-finite values")
            if np.any(arr > 0):
                raise DomainError(f"{name} contains log-probabilities above 0")
        if not self.beta > 0:
            raise DomainError("beta must be positive")

    def __len__(self) -> int:
        return len(self.policy_preferred)

    def margins(self) -> np.ndarray:
        """beta * ((policy - reference) margin of preferred minus dispreferred)."""
        delta_pos = self.policy_preferred - self.reference_preferred
        delta_neg = self.policy_dispreferred - self.reference_dispreferred
        return self.beta * (delta_pos - delta_neg)


def _softplus(x: np.ndarray) -> np.ndarray:
    # -log sigmoid(z) == softplus(-z), stable in both tails
    return np.logaddexp(0.0, x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def dpo_loss(batch: DpoBatch) -> float:
    """Mean over pairs of ``-log sigmoid(margin)``; ln 2 when policy and
    reference agree, decreasing toward 0 as the preferred margin grows."""
    return float(np.mean(_softplus(-batch.margins())))


@dataclass(frozen=True)
class DpoGradients:
    """Loss gradients w.r.t. the four log-probability inputs, per pair."""

    policy_preferred: np.ndarray
    policy_dispreferred: np.ndarray
    reference_preferred: np.ndarray
    reference_dispreferred: np.ndarray


def dpo_loss_grad(batch: DpoBatch) -> DpoGradients:
    """Analytic gradient of :func:`dpo_loss`.

    With z the per-pair margin and N the pair count, the preferred policy
    term gets ``-beta * sigmoid(-z) / N``, the dispreferred one its negation,
    and the reference terms mirror the policy terms with opposite sign.
    """
    z = batch.margins()
    weight = batch.beta * _sigmoid(-z) / len(batch)
    return DpoGradients(
        policy_preferred=-weight,
        policy_dispreferred=weight.copy(),
        reference_preferred=weight.copy(),
        reference_dispreferred=-weight,
    )


# ---------------------------------------------------------------------------
# Preference-pair manifest
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PairCandidate:
    condition_id: str
    mesh_a: str
    mesh_b: str
    cd_a: float
    cd_b: float
    faces_a: int
    faces_b: int


@dataclass(frozen=True)
class PairRow:
    condition_id: str
    mesh_a: str
    mesh_b: str
    cd_a: float
    cd_b: float
    outcome: PairOutcome
    chosen: str = ""  # "A", "B" or empty while unresolved

    @property
    def resolved(self) -> bool:
        return self.outcome is not PairOutcome.NEEDS_HUMAN or self.chosen in ("A", "B")


_OUTCOME_CHOSEN = {
    PairOutcome.PREFER_FIRST: "A",
    PairOutcome.PREFER_SECOND: "B",
    PairOutcome.DISCARD_BOTH: "",
    PairOutcome.NEEDS_HUMAN: "",
}


def build_pair_manifest(
    candidates: list[PairCandidate], cfg: CurationConfig
) -> list[PairRow]:
    """Gate candidates into manifest rows.

    Candidates where either mesh has fewer than ``face_min`` faces are
    excluded entirely; the rest are labeled by :func:`decide_pair`.
    NEEDS_HUMAN rows carry an empty ``chosen`` field for later annotation.
    """
    if cfg.cd_threshold is None:
        raise ConfigError("cd_threshold is required to build a pair manifest")
    seen: set[tuple[str, str, str]] = set()
    rows: list[PairRow] = []
    for cand in candidates:
        key = (cand.condition_id, cand.mesh_a, cand.mesh_b)
        if key in seen:
            raise StructureError(f"duplicate candidate row {key}")
        seen.add(key)
        if cand.faces_a < cfg.face_min or cand.faces_b < cfg.face_min:
            continue
        decision = decide_pair(cand.cd_a, cand.cd_b, cfg.cd_threshold)
        rows.append(
            PairRow(
                cand.condition_id,
                cand.mesh_a,
                cand.mesh_b,
                cand.cd_a,
                cand.cd_b,
                decision.outcome,
                _OUTCOME_CHOSEN[decision.outcome],
            )
        )
    return rows


_MANIFEST_HEADER = "condition_id\tA\tB\tcd_A\tcd_B\toutcome\tchosen"


def write_pair_manifest(rows: list[PairRow], path: str | Path) -> None:
    lines = [_MANIFEST_HEADER]
    for row in rows:
        lines.append(
            f"{row.condition_id}\t{row.mesh_a}\t{row.mesh_b}\t"
            f"{row.cd_a!r}\t{row.cd_b!r}\t{row.outcome.value}\t{row.chosen}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_pair_manifest(path: str | Path) -> list[PairRow]:
    rows: list[PairRow] = []
    seen: set[tuple[str, str, str]] = set()
    lines = Path(path).read_text().splitlines()
    for lineno, line in enumerate(lines, 1):
        if not line.strip() or (lineno == 1 and line.startswith("condition_id")):
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 7:
            raise StructureError(f"line {lineno}: expected 7 tab-separated columns")
        cond, a, b, cd_a, cd_b, outcome, chosen = parts
        key = (cond, a, b)
        if key in seen:
            raise StructureError(f"line {lineno}: duplicate row {key}")
        seen.add(key)
        if chosen not in ("", "A", "B"):
            raise StructureError(f"line {lineno}: chosen must be A, B or empty")
        try:
            rows.append(
                PairRow(cond, a, b, float(cd_a), float(cd_b), PairOutcome(outcome), chosen)
            )
        except ValueError as exc:
            raise StructureError(f"line {lineno}: {exc}") from None
    return rows


def merge_annotations(rows: list[PairRow], annotated: list[PairRow]) -> list[PairRow]:
    """Fill NEEDS_HUMAN rows from an annotated copy of the manifest; row
    identity is (condition, A, B). Unrelated rows pass through unchanged."""
    fills = {
        (r.condition_id, r.mesh_a, r.mesh_b): r.chosen
        for r in annotated
        if r.chosen in ("A", "B")
    }
    merged = []
    for row in rows:
        key = (row.condition_id, row.mesh_a, row.mesh_b)
        if row.outcome is PairOutcome.NEEDS_HUMAN and not row.chosen and key in fills:
            merged.append(
                PairRow(
                    row.condition_id, row.mesh_a, row.mesh_b,
                    row.cd_a, row.cd_b, row.outcome, fills[key],
                )
            )
        else:
            merged.append(row)
    return merged
