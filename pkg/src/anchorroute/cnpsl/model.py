"""Cross-nested path-size logit: probabilities, likelihood, and MLE.

A route's deterministic utility is ``beta . x + beta_ps * ln PS``; its
choice probability combines a nest marginal (inclusive values raised to
the nest scale) with a within-nest conditional, summed over the nests the
route fractionally belongs to. With one universal nest and unit scale the
model collapses to a multinomial logit, and the implementation reproduces
``softmax`` bit for bit on that path.

Nest scales are the ratio of the upper to the within-nest scale and must
stay in (0, 1] for random-utility consistency; they are estimated through
a logistic transform of unconstrained parameters. ``fixed`` mode pins all
scales to exactly 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize

from ..features import Dataset, ModelVariant
from .kernel import cnl_kernel
from .pack import PackedDataset, pack_dataset

SCALE_MODES = ("fixed", "shared", "per_nest")


def logsumexp_1d(a: np.ndarray) -> float:
    """Max-shifted log-sum-exp of a 1D array; -inf entries drop out."""
    m = float(np.max(a))
    if not math.isfinite(m):
        return m
    return m + math.log(float(np.sum(np.exp(a - m))))


def log_softmax(v: np.ndarray) -> np.ndarray:
    return v - logsumexp_1d(v)


def cnl_log_probs(v: np.ndarray, lnalpha: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Log choice probabilities for one choice set.

    ``v`` (J,) systematic utilities, ``lnalpha`` (J, M) log memberships
    (-inf where zero), ``mu`` (M,) nest scales. Nests with zero inclusive
    value are skipped. Shares ``logsumexp_1d`` with ``log_softmax`` so the
    single-nest unit-scale case reduces to it exactly.
    """
    j_n, m_n = lnalpha.shape
    ls = np.empty(m_n)
    for m in range(m_n):
        ls[m] = logsumexp_1d(lnalpha[:, m] + v)
    finite = np.isfinite(ls)
    ln_d = logsumexp_1d(np.where(finite, mu * ls, -np.inf))
    with np.errstate(invalid="ignore"):
        shift = np.where(finite, (mu - 1.0) * ls, -np.inf)
    ln_t = np.empty(j_n)
    for j in range(j_n):
        ln_t[j] = logsumexp_1d(lnalpha[j] + shift)
    return v + ln_t - ln_d


@dataclass(frozen=True)
class ModelSpec:
    """Feature columns, nest structure, and scale parameterization."""

    feature_names: tuple[str, ...]
    scale_mode: str = "fixed"
    anchor_ids: tuple[int, ...] = (0,)
    variant: ModelVariant | None = None

    def __post_init__(self):
        if self.scale_mode not in SCALE_MODES:
            raise ValueError(f"unknown scale mode {self.scale_mode!r}")

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def n_scales(self) -> int:
        if self.scale_mode == "fixed":
            return 0
        if self.scale_mode == "shared":
            return 1
        return len(self.anchor_ids)

    @property
    def n_params(self) -> int:
        return self.n_features + 1 + self.n_scales

    def param_names(self) -> list[str]:
        names = list(self.feature_names) + ["ln_path_size"]
        if self.scale_mode == "shared":
            names.append("scale_theta")
        elif self.scale_mode == "per_nest":
            names.extend(f"scale_theta[{a}]" for a in self.anchor_ids)
        return names


def spec_for(dataset: Dataset, scale_mode: str | None = None) -> ModelSpec:
    """Spec matching a dataset: anchored variants get a shared scale by
    default, un-anchored ones a single fixed-scale universal nest."""
    if scale_mode is None:
        scale_mode = "shared" if dataset.variant.with_anchors else "fixed"
    return ModelSpec(
        feature_names=tuple(dataset.feature_names),
        scale_mode=scale_mode,
        anchor_ids=tuple(dataset.anchor_ids()),
        variant=dataset.variant,
    )


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass
class Params:
    beta: np.ndarray
    beta_ps: float
    theta: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def zeros(cls, spec: ModelSpec) -> "Params":
        return cls(np.zeros(spec.n_features), 0.0, np.zeros(spec.n_scales))

    @classmethod
    def from_vector(cls, vec, spec: ModelSpec) -> "Params":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (spec.n_params,):
            raise ValueError(f"expected {spec.n_params} parameters, got {vec.shape}")
        f = spec.n_features
        return cls(vec[:f].copy(), float(vec[f]), vec[f + 1 :].copy())

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.beta, [self.beta_ps], self.theta])

    def mu_for(self, spec: ModelSpec) -> np.ndarray:
        """Nest scales per anchor id, in spec order."""
        m = len(spec.anchor_ids)
        if spec.scale_mode == "fixed":
            return np.ones(m)
        if spec.scale_mode == "shared":
            return np.full(m, _sigmoid(self.theta[0]))
        return _sigmoid(self.theta)


def route_value(x: np.ndarray, ln_ps: float, params: Params) -> float:
    """exp(beta . x + beta_ps * ln PS), evaluated in log space."""
    return math.exp(float(params.beta @ np.asarray(x, dtype=float)) + params.beta_ps * ln_ps)


def choice_probabilities(x, ln_ps, alpha, params: Params, spec: ModelSpec) -> np.ndarray:
    """Choice probabilities for one choice set.

    ``x`` (J, F) features, ``ln_ps`` (J,) log path sizes, ``alpha`` a
    sequence of {anchor: fraction} mappings, one per route.
    """
    x = np.asarray(x, dtype=float)
    ln_ps = np.asarray(ln_ps, dtype=float)
    if x.shape[0] == 0:
        raise ValueError("empty choice set")
    if x.shape[1] != spec.n_features:
        raise ValueError(f"feature dimension {x.shape[1]} != {spec.n_features}")
    local = sorted({a for row in alpha for a in row})
    unknown = set(local) - set(spec.anchor_ids)
    if unknown:
        raise ValueError(f"alpha references nests outside the spec: {sorted(unknown)}")
    pos = {a: i for i, a in enumerate(local)}
    lnalpha = np.full((x.shape[0], len(local)), -np.inf)
    for j, row in enumerate(alpha):
        for a, val in row.items():
            if val > 0.0:
                lnalpha[j, pos[a]] = math.log(val)
    mu_all = params.mu_for(spec)
    gid = {a: i for i, a in enumerate(spec.anchor_ids)}
    mu = np.array([mu_all[gid[a]] for a in local])
    v = x @ params.beta + params.beta_ps * ln_ps
    return np.exp(cnl_log_probs(v, lnalpha, mu))


def _mu_padded(pack: PackedDataset, params: Params, spec: ModelSpec) -> np.ndarray:
    mu_all = params.mu_for(spec)
    # pack nests are indexed over pack.anchor_ids; map through spec order
    spec_pos = {a: i for i, a in enumerate(spec.anchor_ids)}
    try:
        lut = np.array([mu_all[spec_pos[a]] for a in pack.anchor_ids])
    except KeyError as exc:
        raise ValueError(f"dataset uses anchor {exc.args[0]} unknown to the spec") from None
    mu = np.ones(pack.nest_gid.shape)
    valid = pack.nest_gid >= 0
    mu[valid] = lut[pack.nest_gid[valid]]
    return mu


def loglik_and_grad(
    pack: PackedDataset,
    params: Params,
    spec: ModelSpec,
    weights: np.ndarray | None = None,
    need_grad: bool = True,
):
    """Total log likelihood and its gradient as a parameter vector."""
    v = pack.utilities(params.beta, params.beta_ps)
    mu = _mu_padded(pack, params, spec)
    logp, dv, dmu = cnl_kernel(
        v, pack.lnalpha, mu, pack.n_routes, pack.n_nests, pack.chosen, need_grad
    )
    w = np.ones(pack.n_obs) if weights is None else weights
    ll = float(np.sum(w * logp))
    if not need_grad:
        return ll, None
    dv = dv * w[:, None]
    g_rows = pack.scatter_route_grad(dv)
    g_beta = pack.x.T @ g_rows
    g_ps = float(pack.ln_ps @ g_rows)
    if spec.scale_mode == "fixed":
        g_theta = np.zeros(0)
    else:
        dmu = dmu * w[:, None]
        valid = pack.nest_gid >= 0
        g_mu = np.zeros(len(pack.anchor_ids))
        np.add.at(g_mu, pack.nest_gid[valid], dmu[valid])
        mu_all = params.mu_for(spec)
        spec_pos = {a: i for i, a in enumerate(spec.anchor_ids)}
        if spec.scale_mode == "shared":
            s = mu_all[0]
            g_theta = np.array([float(np.sum(g_mu)) * s * (1.0 - s)])
        else:
            g_theta = np.zeros(len(spec.anchor_ids))
            for k, a in enumerate(pack.anchor_ids):
                i = spec_pos[a]
                g_theta[i] += g_mu[k] * mu_all[i] * (1.0 - mu_all[i])
    grad = np.concatenate([g_beta, [g_ps], g_theta])
    return ll, grad


def log_likelihood(dataset, params: Params, spec: ModelSpec, use_multiplicity=False) -> float:
    pack = dataset if isinstance(dataset, PackedDataset) else pack_dataset(dataset)
    weights = pack.multiplicity if use_multiplicity else None
    ll, _ = loglik_and_grad(pack, params, spec, weights, need_grad=False)
    return ll


def adjusted_rho_squared(ll_hat: float, ll_null: float, n_params: int) -> float:
    """1 - (LL + N) / LL0 against the equal-probability null."""
    return 1.0 - (ll_hat + n_params) / ll_null


def significance_stars(t: float) -> str:
    a = abs(t)
    if not math.isfinite(a):
        return ""
    if a > 2.576:
        return "***"
    if a > 1.96:
        return "**"
    if a > 1.645:
        return "*"
    return ""


@dataclass
class FitOptions:
    max_iter: int = 500
    grad_tol: float = 1e-6
    ll_rtol: float = 1e-10
    use_multiplicity: bool = False
    hessian_step: float = 1e-5
    start: Params | None = None


@dataclass
class FitResult:
    spec: ModelSpec
    params: Params
    param_names: list[str]
    estimates: np.ndarray
    std_errors: np.ndarray
    t_stats: np.ndarray
    loglik: float
    loglik_null: float
    rho_squared_adj: float
    iterations: int
    converged: bool
    mu_tilde: np.ndarray
    n_obs: int

    def coefficient_table(self) -> str:
        lines = [f"{'parameter':<24}{'estimate':>12}{'std err':>12}{'t-stat':>10}  sig"]
        for name, est, se, t in zip(
            self.param_names, self.estimates, self.std_errors, self.t_stats
        ):
            se_s = f"{se:.4f}" if math.isfinite(se) else "-"
            t_s = f"{t:.2f}" if math.isfinite(t) else "-"
            lines.append(
                f"{name:<24}{est:>12.4f}{se_s:>12}{t_s:>10}  {significance_stars(t)}"
            )
        lines.append(
            f"log-likelihood {self.loglik:.4f}  null {self.loglik_null:.4f}  "
            f"adj rho^2 {self.rho_squared_adj:.4f}  "
            f"({'converged' if self.converged else 'NOT converged'} "
            f"in {self.iterations} iterations)"
        )
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "param_names": self.param_names,
            "estimates": [float(v) for v in self.estimates],
            "std_errors": [float(v) for v in self.std_errors],
            "t_stats": [float(v) for v in self.t_stats],
            "stars": [significance_stars(t) for t in self.t_stats],
            "loglik": self.loglik,
            "loglik_null": self.loglik_null,
            "rho_squared_adj": self.rho_squared_adj,
            "iterations": self.iterations,
            "converged": self.converged,
            "mu_tilde": [float(v) for v in self.mu_tilde],
            "scale_mode": self.spec.scale_mode,
            "n_obs": self.n_obs,
        }


class _Objective:
    """Negated log likelihood with a one-point cache, shared between the
    value and gradient callbacks of the line search."""

    def __init__(self, pack, spec, weights):
        self.pack = pack
        self.spec = spec
        self.weights = weights
        self._key = None
        self._val = None
        self.evaluations = 0

    def _eval(self, vec):
        key = vec.tobytes()
        if self._key != key:
            params = Params.from_vector(vec, self.spec)
            ll, grad = loglik_and_grad(self.pack, params, self.spec, self.weights)
            self._key = key
            self._val = (-ll, -grad)
            self.evaluations += 1
        return self._val

    def f(self, vec):
        return self._eval(np.asarray(vec))[0]

    def g(self, vec):
        return self._eval(np.asarray(vec))[1].copy()


def fit(dataset, spec: ModelSpec, options: FitOptions | None = None) -> FitResult:
    """Maximize the likelihood by BFGS from zero.

    Convergence is declared when the gradient infinity norm drops below
    ``grad_tol`` or the relative log-likelihood change drops below
    ``ll_rtol``; otherwise the fit stops after ``max_iter`` iterations
    with partial estimates and ``converged=False``. Standard errors come
    from the inverse negative Hessian, estimated by central differences
    of the analytic gradient.
    """
    opt = options or FitOptions()
    pack = dataset if isinstance(dataset, PackedDataset) else pack_dataset(dataset)
    weights = pack.multiplicity if opt.use_multiplicity else None
    obj = _Objective(pack, spec, weights)

    p = (opt.start or Params.zeros(spec)).to_vector()
    if p.shape != (spec.n_params,):
        raise ValueError("start parameters do not match the spec")
    f_val = obj.f(p)
    g = obj.g(p)
    n = len(p)
    b_inv = np.eye(n)
    converged = bool(np.max(np.abs(g)) < opt.grad_tol)
    iterations = 0

    while not converged and iterations < opt.max_iter:
        iterations += 1
        d = -b_inv @ g
        if d @ g >= 0.0:  # reset on loss of descent direction
            b_inv = np.eye(n)
            d = -g
        alpha = _line_search(obj, p, d, f_val, g)
        if alpha is None:
            break
        p_new = p + alpha * d
        f_new = obj.f(p_new)
        g_new = obj.g(p_new)
        s = p_new - p
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-10 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            rho = 1.0 / sy
            outer = np.outer(s, y)
            b_inv = (np.eye(n) - rho * outer) @ b_inv @ (np.eye(n) - rho * outer.T)
            b_inv += rho * np.outer(s, s)
        rel_change = abs(f_new - f_val) / max(abs(f_val), 1e-12)
        p, f_val, g = p_new, f_new, g_new
        if np.max(np.abs(g)) < opt.grad_tol or rel_change < opt.ll_rtol:
            converged = True

    params = Params.from_vector(p, spec)
    se, tstat = _standard_errors(obj, p, opt.hessian_step)
    ll = -f_val
    ll_null = pack.null_loglik(weights)
    return FitResult(
        spec=spec,
        params=params,
        param_names=spec.param_names(),
        estimates=p,
        std_errors=se,
        t_stats=tstat,
        loglik=ll,
        loglik_null=ll_null,
        rho_squared_adj=adjusted_rho_squared(ll, ll_null, spec.n_params),
        iterations=iterations,
        converged=converged,
        mu_tilde=params.mu_for(spec),
        n_obs=pack.n_obs,
    )


def _line_search(obj, p, d, f_val, g):
    with warnings.catch_warnings():
        # the Wolfe search may stall near the optimum; backtracking covers it
        warnings.simplefilter("ignore")
        ls = scipy.optimize.line_search(
            obj.f, obj.g, p, d, gfk=g, old_fval=f_val, maxiter=30
        )
    if ls[0] is not None:
        return ls[0]
    # fall back to plain backtracking when the Wolfe search stalls
    slope = float(g @ d)
    alpha = 1.0
    for _ in range(40):
        if obj.f(p + alpha * d) <= f_val + 1e-4 * alpha * slope:
            return alpha
        alpha *= 0.5
    return None


def _standard_errors(obj, p, step):
    n = len(p)
    hess = np.empty((n, n))
    for j in range(n):
        h = step * (1.0 + abs(p[j]))
        e = np.zeros(n)
        e[j] = h
        hess[:, j] = (obj.g(p + e) - obj.g(p - e)) / (2.0 * h)
    hess = 0.5 * (hess + hess.T)  # Hessian of -LL
    se = np.full(n, np.nan)
    try:
        cov = np.linalg.inv(hess)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(hess)
    diag = np.diag(cov)
    ok = diag > 0.0
    se[ok] = np.sqrt(diag[ok])
    with np.errstate(invalid="ignore"):
        tstat = np.where(np.isfinite(se) & (se > 0), p / se, np.nan)
    return se, tstat


def _embed(src: FitResult, dst_spec: ModelSpec) -> Params:
    """Warm start for a nested model: copy shared coefficients, zero the
    rest, and push fixed scales toward 1 when the target estimates them."""
    params = Params.zeros(dst_spec)
    src_idx = {name: i for i, name in enumerate(src.spec.feature_names)}
    for i, name in enumerate(dst_spec.feature_names):
        if name in src_idx:
            params.beta[i] = src.params.beta[src_idx[name]]
    params.beta_ps = src.params.beta_ps
    if dst_spec.scale_mode != "fixed" and src.spec.scale_mode == "fixed":
        params.theta[:] = 3.0  # sigmoid(3) ~ 0.95, close to the MNL limit
    elif dst_spec.scale_mode == src.spec.scale_mode and len(params.theta) == len(
        src.params.theta
    ):
        params.theta[:] = src.params.theta
    return params


def compare_variants(
    datasets: dict[ModelVariant, Dataset],
    options: FitOptions | None = None,
    scale_mode: str | None = None,
) -> dict[ModelVariant, FitResult]:
    """Fit all supplied variants on shared choice sets.

    Nested pairs are refit from the smaller model's solution whenever the
    cold start lands below it, so reported likelihoods respect nesting.
    """
    opt = options or FitOptions()
    results: dict[ModelVariant, FitResult] = {}
    order = sorted(datasets, key=int)
    for variant in order:
        dataset = datasets[variant]
        spec = spec_for(dataset, scale_mode)
        res = fit(dataset, spec, opt)
        for parent, child in ((1, 2), (1, 3), (2, 4), (3, 4)):
            if int(variant) == child and ModelVariant(parent) in results:
                src = results[ModelVariant(parent)]
                if res.loglik < src.loglik:
                    warm = replace(opt, start=_embed(src, spec))
                    res2 = fit(dataset, spec, warm)
                    if res2.loglik > res.loglik:
                        res = res2
        results[variant] = res
    return results


def comparison_table(results: dict[ModelVariant, FitResult]) -> str:
    order = sorted(results, key=int)
    names: list[str] = []
    for v in order:
        for n in results[v].param_names:
            if n not in names:
                names.append(n)
    header = f"{'parameter':<24}" + "".join(f"{f'Model {int(v)}':>22}" for v in order)
    lines = [header]
    for name in names:
        row = f"{name:<24}"
        for v in order:
            r = results[v]
            if name in r.param_names:
                i = r.param_names.index(name)
                row += f"{r.estimates[i]:>12.4f} ({r.t_stats[i]:>5.1f}){significance_stars(r.t_stats[i]):<3}"
            else:
                row += f"{'-':>22}"
        lines.append(row)
    lines.append(
        f"{'adj rho^2':<24}"
        + "".join(f"{results[v].rho_squared_adj:>22.4f}" for v in order)
    )
    lines.append(
        f"{'log-likelihood':<24}" + "".join(f"{results[v].loglik:>22.2f}" for v in order)
    )
    return "\n".join(lines)
