"""Knill-Laflamme residuals of eigenstate codes and the chaos-code bounds.

For a code spanned by 2**k eigenstates inside a microcanonical window and a
d-local error operator A, the residual matrix is

    eps_ij = <E_i|A^dag A|E_j> - C_A delta_ij,

computed by the full-spectrum contraction sum_m conj(A_mi) A_mj. C_A is the
arithmetic mean of the code-member diagonal values (the report records the
diagonal spread, so the quality of the which-state independence is visible).
The code error is eps_code = 2**(d+2k) * sqrt(max_ij |eps_ij|).

The bound formulas relate eps_code, the entropy S, the growth rate lam and
the pair frequency separation w:

    eps_code  <= 2**(d+2k) * exp(-S/4 - pi*|w|/(2*lam))        (upper bound)
    lam       >= pi*|w| / (2*ln(2**(d+2k)/eps_code) - S/2)      (lower bound)

with lam itself capped by the chaos bound 2*pi/beta. All checks carry a
configurable slack factor because the inequalities hold up to O(1) factors.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

DEFAULT_SLACK = 10.0


@dataclass(frozen=True)
class CodeSpec:
    """2**k eigenstate indices forming a code against d-local errors."""

    members: tuple
    k: int
    d: int
    n_qubits: int = None

    def __post_init__(self):
        members = tuple(int(m) for m in self.members)
        object.__setattr__(self, "members", members)
        if len(members) != 1 << self.k:
            raise ValidationError(
                f"code needs 2**k = {1 << self.k} members, got {len(members)}"
            )
        if len(set(members)) != len(members):
            raise ValidationError("code members must be distinct")
        if self.d < 0 or self.k < 0:
            raise ValidationError("d and k must be nonnegative")
        if self.n_qubits is not None and self.d > self.n_qubits:
            raise ValidationError("error locality d exceeds qubit count")


def select_code_states(window, k, method="nearest", spectrum=None, seed=None):
    """Pick 2**k member indices inside a window.

    ``nearest`` takes the states closest to the window center (narrowest
    shell); ``random`` draws uniformly inside the window for robustness
    studies.
    """
    need = 1 << k
    idx = window.indices
    if idx.size < need:
        raise ValidationError(
            f"window holds {idx.size} states, need {need} for k={k}"
        )
    if method == "nearest":
        if spectrum is None:
            raise ValidationError("nearest selection needs the spectrum")
        e = spectrum.eigenvalues[idx]
        order = np.argsort(np.abs(e - window.center), kind="stable")
        chosen = np.sort(idx[order[:need]])
    elif method == "random":
        rng = np.random.Generator(np.random.Philox(key=np.uint64(seed or 0)))
        chosen = np.sort(rng.choice(idx, size=need, replace=False))
    else:
        raise ValidationError(f"unknown selection method {method!r}")
    return tuple(int(c) for c in chosen)


@dataclass(frozen=True)
class KlResidualReport:
    """Residual matrix and code error for one (operator, code) pair."""

    code: CodeSpec
    c_a: float
    epsilon: np.ndarray
    eps_max: float
    eps_code: float
    omega: np.ndarray
    member_energies: np.ndarray
    diagonal_spread: float
    metadata: dict = field(default_factory=dict)

    @property
    def omega_char(self):
        """Largest pair separation |w_ij| inside the code."""
        return float(np.abs(self.omega).max())

    def to_dict(self):
        return {
            "members": list(self.code.members),
            "k": self.code.k,
            "d": self.code.d,
            "n_qubits": self.code.n_qubits,
            "c_a": self.c_a,
            "epsilon_re": self.epsilon.real.tolist(),
            "epsilon_im": self.epsilon.imag.tolist(),
            "eps_max": self.eps_max,
            "eps_code": self.eps_code,
            "omega": self.omega.tolist(),
            "member_energies": self.member_energies.tolist(),
            "diagonal_spread": self.diagonal_spread,
            "metadata": dict(self.metadata),
        }


def kl_residuals(a, spectrum, code, metadata=None):
    """Residuals eps_ij by full-spectrum contraction.

    Cost is O(D * 4**k): only the code-member columns of A enter through
    G = A[:, members], eps = G^dag G - C_A I.
    """
    d = a.matrix.shape[0]
    if spectrum.dim != d:
        raise ValidationError("operator and spectrum dimensions differ")
    members = np.asarray(code.members)
    if members.min() < 0 or members.max() >= d:
        raise ValidationError("code member index out of range")
    g = a.matrix[:, members]
    gram = g.conj().T @ g
    diag = np.real(np.diagonal(gram))
    c_a = float(diag.mean())
    eps = gram - c_a * np.eye(members.size)
    energies = spectrum.eigenvalues[members]
    omega = energies[:, None] - energies[None, :]
    eps_max = float(np.abs(eps).max())
    eps_code = float(2.0 ** (code.d + 2 * code.k) * math.sqrt(eps_max))
    return KlResidualReport(
        code=code,
        c_a=c_a,
        epsilon=eps,
        eps_max=eps_max,
        eps_code=eps_code,
        omega=omega,
        member_energies=energies,
        diagonal_spread=float(diag.max() - diag.min()),
        metadata=dict(metadata or {}),
    )


def code_error_bound(entropy, lam, omega, d, k, weak_exponent=False):
    """Upper bound 2**(d+2k) * exp(-S/4 - pi*|w|/(2*lam)) on the code error.

    ``weak_exponent`` evaluates the alternate form with pi*|w|/(4*lam) in
    the exponent, the weaker rate that appears when the square root is
    carried through the frequency factor; both are reported by
    :func:`check_bounds` and neither is resolved here.
    """
    if lam <= 0:
        raise ValidationError("growth rate lam must be positive")
    rate = 4.0 * lam if weak_exponent else 2.0 * lam
    return float(2.0 ** (d + 2 * k) * math.exp(-entropy / 4.0 - math.pi * abs(omega) / rate))


def lyapunov_lower_bound(eps_code, d, k, entropy, omega):
    """Lower bound pi*|w| / (2*ln(2**(d+2k)/eps_code) - S/2) on the growth rate.

    Returns 0.0 at w = 0 (no constraint) and None when the denominator is
    nonpositive, i.e. the bound is vacuous for these inputs; vacuity is a
    reportable outcome, not a numeric error.
    """
    if eps_code <= 0:
        # perfect code: ln(1/eps) -> inf, the bound collapses to zero
        return 0.0
    if omega == 0:
        return 0.0
    denom = 2.0 * (math.log(2.0) * (d + 2 * k) - math.log(eps_code)) - entropy / 2.0
    if denom <= 0:
        return None
    return float(math.pi * abs(omega) / denom)


@dataclass(frozen=True)
class BoundReport:
    """Both sides of the code-error and growth-rate inequalities.

    ``flags`` use the report's slack factor; a None lower bound means the
    growth-rate bound was vacuous for these inputs. ``per_pair`` lists, for
    every ordered code pair i < j, the separation, the pairwise code error
    2**(d+2k) * sqrt(|eps_ij|), the bound at that separation, and their
    ratio.
    """

    code_error: float
    code_error_rhs: float
    code_error_rhs_weak: float
    lambda_lower: float
    lambda_used: float
    lambda_source: str
    chaos_bound: float
    entropy_value: float
    omega_char: float
    slack: float
    flags: dict
    slack_ratios: dict
    per_pair: list

    def to_dict(self):
        return {
            "code_error": self.code_error,
            "code_error_rhs": self.code_error_rhs,
            "code_error_rhs_weak": self.code_error_rhs_weak,
            "lambda_lower": self.lambda_lower,
            "lambda_used": self.lambda_used,
            "lambda_source": self.lambda_source,
            "chaos_bound": self.chaos_bound,
            "entropy_value": self.entropy_value,
            "omega_char": self.omega_char,
            "slack": self.slack,
            "flags": dict(self.flags),
            "slack_ratios": dict(self.slack_ratios),
            "per_pair": [list(row) for row in self.per_pair],
        }

    @property
    def all_within_slack(self):
        return all(self.flags.values())


def resolve_lambda(beta, lyapunov_fit=None, envelope=None):
    """Growth-rate source precedence: accepted fit, envelope-implied, chaos bound.

    ``lyapunov_fit`` may be a LyapunovFit or a bare fitted rate. The envelope
    decay gamma implies lam = pi/(2*gamma) by matching exp(-gamma*|w|)
    against exp(-pi*|w|/(2*lam)). Returns (lam, source).
    """
    if lyapunov_fit is not None:
        lam_fit = float(getattr(lyapunov_fit, "lam", lyapunov_fit))
        if lam_fit > 0:
            return lam_fit, "fitted"
    if envelope is not None:
        gamma = envelope.central_gamma
        if np.isfinite(gamma) and gamma > 0:
            return float(math.pi / (2.0 * gamma)), "envelope-implied"
    if beta > 0:
        return float(2.0 * math.pi / beta), "chaos-bound"
    raise ValidationError(
        "no growth-rate source available: no fit, no envelope decay, beta = 0"
    )


def check_bounds(report, entropy, beta, envelope=None, lyapunov_fit=None,
                 slack=DEFAULT_SLACK):
    """Evaluate the code-error bound and the growth-rate sandwich for a code.

    The entropy is taken at the mean code-member energy. Checks are flagged
    as violations only beyond ``slack``, since every inequality drops O(1)
    constants. A vacuous lower bound is flagged separately and does not
    count as a violation.
    """
    lam, source = resolve_lambda(beta, lyapunov_fit=lyapunov_fit, envelope=envelope)
    s_value = float(entropy.entropy_at(float(report.member_energies.mean())))
    d, k = report.code.d, report.code.k
    omega_char = report.omega_char
    chaos = float(2.0 * math.pi / beta) if beta > 0 else float("inf")

    rhs = code_error_bound(s_value, lam, omega_char, d, k)
    rhs_weak = code_error_bound(s_value, lam, omega_char, d, k, weak_exponent=True)
    lower = lyapunov_lower_bound(report.eps_code, d, k, s_value, omega_char)

    per_pair = []
    n = report.epsilon.shape[0]
    pref = 2.0 ** (d + 2 * k)
    for i in range(n):
        for j in range(i + 1, n):
            w = abs(float(report.omega[i, j]))
            pair_err = pref * math.sqrt(abs(report.epsilon[i, j]))
            pair_rhs = code_error_bound(s_value, lam, w, d, k)
            ratio = pair_err / pair_rhs if pair_rhs > 0 else float("inf")
            per_pair.append((i, j, w, pair_err, pair_rhs, ratio))

    ratio_code = report.eps_code / rhs if rhs > 0 else float("inf")
    ratio_lower = (lower / lam) if (lower is not None and lam > 0) else 0.0
    ratio_chaos = lam / chaos if math.isfinite(chaos) else 0.0

    flags = {
        "code_error_within_slack": bool(ratio_code <= slack),
        "pairs_within_slack": bool(all(r[5] <= slack for r in per_pair)),
        "lower_bound_consistent": bool(lower is None or lower <= lam * slack),
        # estimated rates may straddle the chaos bound at saturation, so
        # this flag carries the same slack as every other inequality; the
        # precise ratio is always in slack_ratios
        "chaos_bound_respected": bool(lam <= chaos * slack),
    }
    slack_ratios = {
        "code_error": float(ratio_code),
        "pair_max": float(max((r[5] for r in per_pair), default=0.0)),
        "lower_over_used": float(ratio_lower),
        "used_over_chaos": float(ratio_chaos),
    }
    return BoundReport(
        code_error=report.eps_code,
        code_error_rhs=rhs,
        code_error_rhs_weak=rhs_weak,
        lambda_lower=lower if lower is None else float(lower),
        lambda_used=lam,
        lambda_source=source,
        chaos_bound=chaos,
        entropy_value=s_value,
        omega_char=omega_char,
        slack=float(slack),
        flags=flags,
        slack_ratios=slack_ratios,
        per_pair=per_pair,
    )
