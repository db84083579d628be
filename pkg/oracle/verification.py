"""
Closed form versus oracle verification suites

Each suite sweeps a parameter grid, compares a closed-form quantity from
the rates app with the dense conditioning oracle, and reports the largest
residual. The verify management command runs these.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from django.conf import settings

from core.exceptions import OracleCapExceeded, ParameterRangeError, VerificationFailure
from core.models import ExchangeableMatrix, SourceModel, source_covariance, spectrum
from core.parallel import ordered_map
from rates.bounds import (
    critical_distortion,
    critical_gamma_minus,
    critical_gamma_plus,
    d_minus_theta_minus,
    d_plus_theta_plus,
    gamma_of_d,
)
from rates.centralized import (
    distortion_matrix_centralized,
    rate_centralized,
    rate_from_spectra,
    shannon_lower_bound,
)
from rates.distributed import rate_distributed

from .schemes import AuxScheme, Branch, omega_partition
from .services import ConditioningOracle, relative_residual

logger = logging.getLogger('gaussmt')

SUITES = ('minus', 'plus', 'minus-construction', 'plus-construction', 'distributed', 'mmse')
# short names accepted on the command line
SUITE_ALIASES = {
    'prop4': 'minus',
    'prop5': 'plus',
    'thm1': 'minus-construction',
    'thm2': 'plus-construction',
    'm1': 'distributed',
}
RHO_GRID = (-0.9, -0.7, -0.5, -0.3, -0.1, 0.1, 0.3, 0.5, 0.7, 0.9)
GAMMA_GRID = (0.1, 1.0, 10.0)
# precision matrices are ~1/d, so their residuals are scaled up accordingly
PRECISION_TOL_FACTOR = 10.0


@dataclass(frozen=True)
class CheckCase:
    suite: str
    label: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tolerance)


@dataclass(frozen=True)
class SuiteReport:
    suite: str
    cases: Tuple[CheckCase, ...]

    @property
    def passed(self) -> bool:
        return all(case.passed for case in self.cases)

    @property
    def worst(self) -> Optional[CheckCase]:
        if not self.cases:
            return None
        return max(self.cases, key=lambda case: case.residual / case.tolerance)

    @property
    def max_residual(self) -> float:
        return max((case.residual for case in self.cases), default=0.0)


def _models(ell: int, rhos: Iterable[float]) -> List[SourceModel]:
    models = []
    for rho in rhos:
        try:
            models.append(SourceModel(ell, rho))
        except ParameterRangeError:
            continue
    return models


def _dense_gap(dense: np.ndarray, ell: int, diag: float, off: float) -> float:
    return float(np.max(np.abs(dense - ExchangeableMatrix(ell, diag, off).to_dense())))


class VerificationRunner:
    """
    Runs the verification suites against one oracle instance
    """

    def __init__(self, max_ell: Optional[int] = None, tolerance: Optional[float] = None,
                 n_jobs: Optional[int] = None):
        cap = getattr(settings, 'GAUSSMT_ORACLE_MAX_ELL', 8)
        if max_ell is not None and max_ell > cap:
            raise OracleCapExceeded(f"Verification is capped at ell={cap} (GAUSSMT_ORACLE_MAX_ELL); got ell={max_ell}")
        if max_ell is not None and max_ell < 2:
            raise ParameterRangeError(f"Verification needs ell >= 2, got {max_ell}")
        self.oracle = ConditioningOracle(max_ell=max_ell if max_ell is not None else cap)
        self.max_ell = self.oracle.max_ell
        self.tolerance = tolerance if tolerance is not None else getattr(settings, 'GAUSSMT_VERIFY_TOL', 1e-9)
        self.n_jobs = n_jobs

    def run(self, suites: Optional[Sequence[str]] = None) -> List[SuiteReport]:
        """
        Run the named suites (all of them by default) in a fixed order
        """
        names = [SUITE_ALIASES.get(name, name) for name in suites] if suites else list(SUITES)
        unknown = [name for name in names if name not in SUITES]
        if unknown:
            raise ParameterRangeError(f"Unknown verification suite(s): {', '.join(unknown)}")
        return [self.run_suite(name) for name in SUITES if name in names]

    def run_suite(self, name: str) -> SuiteReport:
        builders = {
            'minus': self._minus_cases,
            'plus': self._plus_cases,
            'minus-construction': self._minus_construction_cases,
            'plus-construction': self._plus_construction_cases,
            'distributed': self._distributed_cases,
            'mmse': self._mmse_cases,
        }
        jobs = builders[name]()
        results = ordered_map(lambda job: job[1](), jobs, n_jobs=self.n_jobs)
        cases = []
        for (label, _), checks in zip(jobs, results):
            for check, residual, factor in checks:
                cases.append(CheckCase(name, f"{label} {check}", float(residual), self.tolerance * factor))
        report = SuiteReport(suite=name, cases=tuple(cases))
        logger.info(f"verify {name}: {len(cases)} checks, max residual {report.max_residual:.3e}")
        return report

    def raise_for_failures(self, reports: Sequence[SuiteReport]) -> None:
        for report in reports:
            if not report.passed:
                worst = report.worst
                raise VerificationFailure(report.suite, worst.label, worst.residual, worst.tolerance)

    # Case builders: each returns [(label, thunk)], thunk -> [(check, residual, tol_factor)]

    def _minus_cases(self):
        jobs = []
        for ell in range(2, self.max_ell + 1):
            for model in _models(ell, RHO_GRID):
                for m in range(2, ell + 1):
                    for gamma in GAMMA_GRID:
                        label = f"ell={ell} m={m} rho={model.rho:g} gamma={gamma:g}"
                        jobs.append((label, self._bind(self._check_minus, model, m, gamma)))
        return jobs

    def _check_minus(self, model: SourceModel, m: int, gamma: float):
        scheme = AuxScheme(Branch.MINUS, gamma, m)
        dense = self.oracle.conditional_covariance(self.oracle.build_joint(model, scheme))
        d, theta = d_minus_theta_minus(model, m, gamma)
        return [('d-/theta-', _dense_gap(dense, model.ell, d, theta), 1.0)]

    def _plus_cases(self):
        jobs = []
        for ell in range(2, self.max_ell + 1):
            for model in _models(ell, [rho for rho in RHO_GRID if rho > 0]):
                for m in range(1, ell + 1):
                    for gamma in GAMMA_GRID:
                        label = f"ell={ell} m={m} rho={model.rho:g} gamma={gamma:g}"
                        jobs.append((label, self._bind(self._check_plus, model, m, gamma)))
        return jobs

    def _check_plus(self, model: SourceModel, m: int, gamma: float):
        scheme = AuxScheme(Branch.PLUS, gamma, m)
        dense = self.oracle.conditional_covariance(self.oracle.build_joint(model, scheme))
        d, theta = d_plus_theta_plus(model, m, gamma)
        return [('d+/theta+', _dense_gap(dense, model.ell, d, theta), 1.0)]

    def _minus_construction_cases(self):
        jobs = []
        for ell in range(2, min(6, self.max_ell) + 1):
            rhos = (-0.05, -0.1, -0.2, -0.5 / (ell - 1), -0.9 / (ell - 1))
            for model in _models(ell, rhos):
                for m in range(2, ell + 1):
                    label = f"ell={ell} m={m} rho={model.rho:.6g}"
                    jobs.append((label, self._bind(self._check_minus_construction, model, m)))
        return jobs

    def _check_minus_construction(self, model: SourceModel, m: int):
        d_critical = model.critical_minus
        gamma_critical = critical_gamma_minus(model, m)
        below = [f * d_critical for f in (0.25, 0.5, 0.75)]
        above = [d_critical + f * (1.0 - d_critical) for f in (0.0, 0.25, 0.5, 0.75)]
        checks = []
        for d in below + above:
            if d < d_critical:
                scheme = AuxScheme(Branch.MINUS, gamma_critical, m, augment=d, omega=omega_partition(model.ell, m))
            else:
                scheme = AuxScheme(Branch.MINUS, gamma_of_d(model, m, d).gamma, m)
            joint = self.oracle.build_joint(model, scheme)
            dense = self.oracle.conditional_covariance(joint)
            target = distortion_matrix_centralized(model, d)
            checks.append((f"d={d:.6g} distortion", _dense_gap(dense, model.ell, target.diag, target.off), 1.0))
            rate = self.oracle.berger_tung_rate(model, joint)
            checks.append((f"d={d:.6g} rate", relative_residual(rate, rate_centralized(model, d)), 1.0))
        return checks

    def _plus_construction_cases(self):
        jobs = []
        for ell in range(2, min(6, self.max_ell) + 1):
            for model in _models(ell, [rho for rho in RHO_GRID if rho > 0]):
                for m in range(2, ell + 1):
                    label = f"ell={ell} m={m} rho={model.rho:g}"
                    jobs.append((label, self._bind(self._check_plus_construction, model, m)))
        return jobs

    def _check_plus_construction(self, model: SourceModel, m: int):
        d_critical = critical_distortion(model, m)
        gamma_critical = critical_gamma_plus(model, m)
        d_reached, theta = d_plus_theta_plus(model, m, gamma_critical)
        joint = self.oracle.build_joint(model, AuxScheme(Branch.PLUS, gamma_critical, m))
        dense = self.oracle.conditional_covariance(joint)
        checks = [
            ('theta+ at critical gamma', abs(theta), 1.0),
            ('d+ at critical gamma', abs(d_reached - d_critical), 1.0),
            ('critical distortion matrix', _dense_gap(dense, model.ell, d_critical, 0.0), 1.0),
            ('rate at critical distortion',
             relative_residual(self.oracle.berger_tung_rate(model, joint), shannon_lower_bound(model, d_critical)), 1.0),
        ]
        omega = omega_partition(model.ell, m)
        for f in (0.25, 0.5, 0.75):
            d = f * d_critical
            scheme = AuxScheme(Branch.PLUS, gamma_critical, m, augment=d, omega=omega)
            joint = self.oracle.build_joint(model, scheme)
            dense = self.oracle.conditional_covariance(joint)
            checks.append((f"d={d:.6g} distortion", _dense_gap(dense, model.ell, d, 0.0), 1.0))
            rate = self.oracle.berger_tung_rate(model, joint)
            checks.append((f"d={d:.6g} rate", relative_residual(rate, shannon_lower_bound(model, d)), 1.0))
            checks.append((f"d={d:.6g} precision additivity",
                           self.oracle.precision_additivity_residual(model, scheme), PRECISION_TOL_FACTOR))
        return checks

    def _distributed_cases(self):
        jobs = []
        for ell in range(2, min(6, self.max_ell) + 1):
            rhos = (-0.5 / (ell - 1), -0.1, 0.3, 0.6, 0.9)
            for model in _models(ell, rhos):
                label = f"ell={ell} rho={model.rho:.6g}"
                jobs.append((label, self._bind(self._check_distributed, model)))
        return jobs

    def _check_distributed(self, model: SourceModel):
        checks = []
        source = spectrum(source_covariance(model))
        for d in np.linspace(0.02, 0.98, 50):
            d = float(d)
            solution = rate_distributed(model, d)
            joint = self.oracle.build_joint(model, AuxScheme(Branch.PLUS, solution.gamma, 1))
            rate = self.oracle.berger_tung_rate(model, joint)
            checks.append((f"d={d:.6g} Berger-Tung", relative_residual(rate, solution.rate_nats), 1.0))
            if model.rho > 0:
                theta = gamma_of_d(model, 1, d).theta
                via_quadratic = rate_from_spectra(source, spectrum(ExchangeableMatrix(model.ell, d, theta)))
                checks.append((f"d={d:.6g} plus quadratic", relative_residual(via_quadratic, solution.rate_nats), 1.0))
        return checks

    def _mmse_cases(self):
        jobs = []
        for ell in range(2, min(5, self.max_ell) + 1):
            for model in _models(ell, RHO_GRID):
                branches = [Branch.MINUS, Branch.PLUS] if model.rho > 0 else [Branch.MINUS]
                for branch in branches:
                    for m in range(1 if branch is Branch.PLUS else 2, ell + 1):
                        for gamma in GAMMA_GRID:
                            label = f"{branch.value} ell={ell} m={m} rho={model.rho:g} gamma={gamma:g}"
                            jobs.append((label, self._bind(self._check_mmse, model, AuxScheme(branch, gamma, m))))
        return jobs

    def _check_mmse(self, model: SourceModel, scheme: AuxScheme):
        dense = self.oracle.conditional_covariance(self.oracle.build_joint(model, scheme))
        error = self.oracle.estimator_error_covariance(model, scheme)
        return [
            ('orthogonality', self.oracle.orthogonality_residual(model, scheme), 1.0),
            ('error covariance', float(np.max(np.abs(error - dense))), 1.0),
        ]

    @staticmethod
    def _bind(func: Callable, *args) -> Callable[[], list]:
        return lambda: func(*args)
