"""Padded array layout of a dataset for the batch likelihood kernel.

Choice sets are ragged (5-ish routes, a handful of touched nests each);
the kernels consume fixed-shape padded arrays instead, with -inf log
memberships marking padding. Packing happens once per fit; only the
systematic utilities change between optimizer iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..features import Dataset


@dataclass
class PackedDataset:
    x: np.ndarray  # (R, F) all route rows stacked
    ln_ps: np.ndarray  # (R,)
    rows: np.ndarray  # (n, Jmax) int32 row index, -1 at pads
    lnalpha: np.ndarray  # (n, Jmax, Mmax), -inf at pads / zero alpha
    nest_gid: np.ndarray  # (n, Mmax) int32 global nest index, -1 at pads
    n_routes: np.ndarray  # (n,) int32
    n_nests: np.ndarray  # (n,) int32
    chosen: np.ndarray  # (n,) int32 slot within the observation
    multiplicity: np.ndarray  # (n,) merged-observation counts of the chosen
    anchor_ids: list[int]  # global nest order for per-nest scales

    @property
    def n_obs(self) -> int:
        return len(self.n_routes)

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    def utilities(self, beta: np.ndarray, beta_ps: float) -> np.ndarray:
        """Padded systematic utilities (n, Jmax); pads hold 0."""
        v_rows = self.x @ beta + beta_ps * self.ln_ps
        v = np.zeros(self.rows.shape)
        valid = self.rows >= 0
        v[valid] = v_rows[self.rows[valid]]
        return v

    def scatter_route_grad(self, dv: np.ndarray) -> np.ndarray:
        """Map per-slot utility gradients back to stacked route rows."""
        g = np.zeros(self.x.shape[0])
        valid = self.rows >= 0
        g[self.rows[valid]] = dv[valid]
        return g

    def null_loglik(self, weights: np.ndarray | None = None) -> float:
        """Log likelihood of the equal-probability null."""
        w = np.ones(self.n_obs) if weights is None else weights
        return float(np.sum(w * -np.log(self.n_routes)))


def pack_dataset(dataset: Dataset) -> PackedDataset:
    obs = dataset.observations
    if not obs:
        raise ValueError("dataset is empty")
    for o in obs:
        if o.n_routes < 2:
            raise ValueError(
                f"choice set {o.od} has {o.n_routes} route(s); need at least 2"
            )
    anchor_ids = dataset.anchor_ids()
    gid_of = {a: i for i, a in enumerate(anchor_ids)}
    n = len(obs)
    jmax = max(o.n_routes for o in obs)
    mmax = max(len({a for al in o.alpha for a in al}) for o in obs)

    x = np.concatenate([o.x for o in obs], axis=0)
    ln_ps = np.concatenate([o.ln_ps for o in obs])
    rows = np.full((n, jmax), -1, dtype=np.int32)
    lnalpha = np.full((n, jmax, mmax), -np.inf)
    nest_gid = np.full((n, mmax), -1, dtype=np.int32)
    n_routes = np.empty(n, dtype=np.int32)
    n_nests = np.empty(n, dtype=np.int32)
    chosen = np.empty(n, dtype=np.int32)
    multiplicity = np.ones(n)

    row0 = 0
    for i, o in enumerate(obs):
        j = o.n_routes
        n_routes[i] = j
        rows[i, :j] = np.arange(row0, row0 + j, dtype=np.int32)
        row0 += j
        local = sorted({a for al in o.alpha for a in al})
        n_nests[i] = len(local)
        nest_gid[i, : len(local)] = [gid_of[a] for a in local]
        pos = {a: k for k, a in enumerate(local)}
        for slot, alpha in enumerate(o.alpha):
            total = 0.0
            for a, val in alpha.items():
                total += val
                if val > 0.0:
                    lnalpha[i, slot, pos[a]] = np.log(val)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"alpha row for OD {o.od} sums to {total}, expected 1")
        chosen[i] = o.chosen
        multiplicity[i] = o.multiplicity[o.chosen] if o.multiplicity else 1.0
    return PackedDataset(
        x=x,
        ln_ps=ln_ps,
        rows=rows,
        lnalpha=lnalpha,
        nest_gid=nest_gid,
        n_routes=n_routes,
        n_nests=n_nests,
        chosen=chosen,
        multiplicity=multiplicity,
        anchor_ids=anchor_ids,
    )
