"""Compare metered traffic against the closed-form per-round cost model.

Per round the model predicts ``3|S|`` encrypted numbers between A and B and
``2n`` numbers between the data parties and the coordinator (n encrypted
gradient entries up, n step entries down). A round that also ships a
curvature pair adds ``2|S_H|`` on A-B and ``n`` encrypted v entries upstream.
Averaged over an L-round window: ``3|S| + 2|S_H|/L`` and ``(2 + 1/L) n``.
"""
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .transport import CommLedger


@dataclass
class WindowAudit:
    t: int
    rounds: tuple
    observed_ab: Fraction
    predicted_ab: Fraction
    observed_pc: Fraction
    predicted_pc: Fraction
    nominal_ab: Optional[Fraction]
    nominal_pc: Optional[Fraction]

    @property
    def ratio_ab(self) -> Fraction:
        return self.observed_ab / self.predicted_ab

    @property
    def ratio_pc(self) -> Fraction:
        return self.observed_pc / self.predicted_pc


def predicted_round(ledger: CommLedger, k: int) -> tuple[int, int]:
    info = ledger.round_info[k]
    n = int(ledger.meta["n"])
    h = int(info.get("hessian", 0))
    return 3 * int(info["batch"]) + 2 * h, 2 * n + (n if h else 0)


def round_rows(ledger: CommLedger) -> list[dict]:
    rows = []
    for k in sorted(ledger.round_info):
        cost = ledger.round_cost(k)
        p_ab, p_pc = predicted_round(ledger, k)
        rows.append({"round": k, "batch": ledger.round_info[k]["batch"],
                     "hessian": ledger.round_info[k].get("hessian", 0),
                     "observed_ab": cost.ab, "predicted_ab": p_ab,
                     "observed_pc": cost.parties_coord, "predicted_pc": p_pc,
                     "upstream_encrypted": cost.upstream_encrypted,
                     "downstream_plain": cost.downstream_plain, "loss_scalars": cost.loss_scalars})
    return rows


def window_audits(ledger: CommLedger) -> list[WindowAudit]:
    """One entry per complete L-window that shipped a curvature pair."""
    L = ledger.meta.get("window")
    if not L:
        return []
    L = int(L)
    n = int(ledger.meta["n"])
    nominal_s = int(ledger.meta["batch_size"])
    out = []
    for k_end, info in sorted(ledger.round_info.items()):
        if k_end % L or not info.get("hessian"):
            continue
        rounds = tuple(range(k_end - L + 1, k_end + 1))
        if any(k not in ledger.round_info for k in rounds):
            continue
        obs = ledger.amortized(rounds)
        preds = [predicted_round(ledger, k) for k in rounds]
        p_ab = Fraction(sum(p[0] for p in preds), L)
        p_pc = Fraction(sum(p[1] for p in preds), L)
        full = all(ledger.round_info[k]["batch"] == nominal_s for k in rounds)
        s_h = int(info["hessian"])
        out.append(WindowAudit(
            t=k_end // L, rounds=rounds,
            observed_ab=obs["ab"], predicted_ab=p_ab,
            observed_pc=obs["parties_coord"], predicted_pc=p_pc,
            nominal_ab=3 * nominal_s + Fraction(2 * s_h, L) if full else None,
            nominal_pc=(2 + Fraction(1, L)) * n if full else None,
        ))
    return out


def overhead_ratio(batch: int, hessian: int, n: int, L: int) -> dict[str, Fraction]:
    """Amortized quasi-Newton cost over SGD cost, per channel and combined."""
    qn_ab = 3 * batch + Fraction(2 * hessian, L)
    qn_pc = (2 + Fraction(1, L)) * n
    return {
        "ab": qn_ab / (3 * batch),
        "parties_coord": qn_pc / (2 * n),
        "total": (qn_ab + qn_pc) / (3 * batch + 2 * n),
        "bound": 1 + Fraction(1, L),
    }


def audit_ledger(ledger: CommLedger) -> dict:
    rows = round_rows(ledger)
    windows = window_audits(ledger)
    out = {
        "meta": ledger.meta,
        "rounds": rows,
        "rounds_match": all(r["observed_ab"] == r["predicted_ab"] and r["observed_pc"] == r["predicted_pc"]
                            for r in rows),
        "windows": [{"t": w.t, "rounds": list(w.rounds), "observed_ab": str(w.observed_ab),
                     "predicted_ab": str(w.predicted_ab), "ratio_ab": str(w.ratio_ab),
                     "observed_pc": str(w.observed_pc), "predicted_pc": str(w.predicted_pc),
                     "ratio_pc": str(w.ratio_pc),
                     "nominal_ab": None if w.nominal_ab is None else str(w.nominal_ab),
                     "nominal_pc": None if w.nominal_pc is None else str(w.nominal_pc)}
                    for w in windows],
        "loss_scalars_unmetered_by_model": sum(r["loss_scalars"] for r in rows),
    }
    L = ledger.meta.get("window")
    if L and ledger.meta.get("method") == "qn":
        s = int(ledger.meta["batch_size"])
        h = ledger.meta.get("hessian_batch_size") or s
        out["overhead_vs_sgd"] = {k: str(v) for k, v in
                                  overhead_ratio(s, int(h), int(ledger.meta["n"]), int(L)).items()}
    return out
