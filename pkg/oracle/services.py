"""
Dense Gaussian conditioning oracle
Builds the joint covariance of sources and auxiliaries for a scheme,
conditions on the auxiliaries and evaluates the Berger-Tung sum rate.
It is the independent check on every closed form in the rates app.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg as la
from django.conf import settings

from core.exceptions import NumericalError, OracleCapExceeded, ParameterRangeError
from core.models import ExchangeableMatrix, SourceModel, log_det, source_covariance, validate_subset_size
from rates.bounds import binomial, critical_distortion, eta_coefficients

from .schemes import AuxScheme, Branch, encoder_subsets, validate_partition

logger = logging.getLogger('gaussmt')


@dataclass(frozen=True)
class AuxRow:
    """Where one auxiliary coordinate comes from: kind is 'U-', 'U+' or 'W'."""
    kind: str
    subset: Tuple[int, ...]
    position: Optional[int] = None


@dataclass(frozen=True)
class JointCovariance:
    """
    Covariance of (X, V) with X the ell sources and V the stacked auxiliaries
    """
    matrix: np.ndarray
    ell: int
    rows: Tuple[AuxRow, ...]

    @property
    def labels(self) -> Tuple[str, ...]:
        aux = []
        for row in self.rows:
            if row.kind == 'W':
                aux.append(f"W{row.position}")
            elif row.position is None:
                aux.append(f"{row.kind}{row.subset}")
            else:
                aux.append(f"{row.kind}{row.subset}.{row.position}")
        return tuple(f"X{i}" for i in range(self.ell)) + tuple(aux)

    @property
    def sxx(self) -> np.ndarray:
        return self.matrix[:self.ell, :self.ell]

    @property
    def sxv(self) -> np.ndarray:
        return self.matrix[:self.ell, self.ell:]

    @property
    def svv(self) -> np.ndarray:
        return self.matrix[self.ell:, self.ell:]


@dataclass(frozen=True)
class MmseWeights:
    """
    Per-branch linear estimator weights

    minus: X_i estimate is kappa times the sum of U-_{S, i} over S containing i
    plus:  alpha on sums containing i, beta on sums that do not
    """
    branch: Branch
    kappa: Optional[float] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None


def exchangeable_fit(dense: np.ndarray) -> Tuple[ExchangeableMatrix, float]:
    """
    Closest (diag, off) pair to a dense matrix and the largest entry deviation from it
    """
    ell = dense.shape[0]
    diag = float(np.mean(np.diag(dense)))
    off = float((dense.sum() - np.trace(dense)) / (ell * (ell - 1))) if ell > 1 else 0.0
    fitted = ExchangeableMatrix(ell, diag, off)
    return fitted, float(np.max(np.abs(dense - fitted.to_dense())))


def refinement_noise(model: SourceModel, scheme: AuxScheme) -> float:
    """
    Variance of the W_i noise that takes a d_c I conditional covariance down to d I
    """
    d = scheme.augment
    d_critical = model.critical_minus if scheme.branch is Branch.MINUS else critical_distortion(model, scheme.m)
    if not (0.0 < d < d_critical):
        raise ParameterRangeError(f"Refinement target d={d} must lie below the critical distortion {d_critical:.6g}")
    return d_critical * d / (d_critical - d)


class ConditioningOracle:
    """
    Service for exact Gaussian conditioning on small networks
    Uses symmetric pseudo-inverses for the auxiliary block and Cholesky
    factorizations for determinants.
    """

    def __init__(self, max_ell: Optional[int] = None, pinv_rtol: Optional[float] = None):
        self.max_ell = max_ell if max_ell is not None else getattr(settings, 'GAUSSMT_ORACLE_MAX_ELL', 8)
        self.pinv_rtol = pinv_rtol if pinv_rtol is not None else getattr(settings, 'GAUSSMT_PINV_RTOL', 1e-12)

    def _check_cap(self, model: SourceModel) -> None:
        if model.ell > self.max_ell:
            raise OracleCapExceeded(
                f"The dense oracle is capped at ell={self.max_ell}; got ell={model.ell}"
            )

    def _observation_map(self, model: SourceModel, scheme: AuxScheme):
        ell, m = model.ell, validate_subset_size(model, scheme.m)
        if scheme.augment is not None:
            validate_partition(ell, m, scheme.omega)
            w_noise = refinement_noise(model, scheme)

        differences = ExchangeableMatrix(m, m - 1.0, -1.0).to_dense()
        selections, noise_blocks, rows = [], [], []
        for subset in encoder_subsets(ell, m):
            columns = list(subset)
            if scheme.branch is Branch.MINUS:
                block = np.zeros((m, ell))
                block[:, columns] = differences
                selections.append(block)
                noise_blocks.append(scheme.gamma * differences)
                rows.extend(AuxRow('U-', subset, k) for k in range(m))
            else:
                block = np.zeros((1, ell))
                block[0, columns] = 1.0
                selections.append(block)
                noise_blocks.append(np.array([[scheme.gamma]]))
                rows.append(AuxRow('U+', subset))
            if scheme.augment is not None:
                for i in scheme.omega.get(subset, ()):
                    block = np.zeros((1, ell))
                    block[0, i] = 1.0
                    selections.append(block)
                    noise_blocks.append(np.array([[w_noise]]))
                    rows.append(AuxRow('W', subset, i))
        return np.vstack(selections), la.block_diag(*noise_blocks), tuple(rows)

    def build_joint(self, model: SourceModel, scheme: AuxScheme) -> JointCovariance:
        """
        Joint covariance [[Sigma, Sigma T'], [T Sigma, T Sigma T' + Q]]
        """
        self._check_cap(model)
        sigma = source_covariance(model).to_dense()
        selection, noise, rows = self._observation_map(model, scheme)
        cross = sigma @ selection.T
        aux = selection @ cross + noise
        joint = np.block([[sigma, cross], [cross.T, aux]])
        joint = 0.5 * (joint + joint.T)
        logger.debug(f"build_joint ell={model.ell} m={scheme.m} {scheme.branch.value}: {len(rows)} auxiliary rows")
        return JointCovariance(matrix=joint, ell=model.ell, rows=rows)

    def _pinv_factor(self, svv: np.ndarray) -> np.ndarray:
        """
        B with B B' = pinv(svv), from the retained eigenpairs of svv
        """
        values, vectors = la.eigh(svv)
        top = float(values.max()) if values.size else 0.0
        if top <= 0:
            return np.zeros((svv.shape[0], 0))
        if values.min() < -1e-9 * top:
            raise NumericalError(f"Auxiliary covariance is not positive semidefinite (min eigenvalue {values.min():.3e})")
        keep = values > self.pinv_rtol * top
        return vectors[:, keep] / np.sqrt(values[keep])

    def conditional_covariance(self, joint: JointCovariance) -> np.ndarray:
        """
        Sigma_XX - Sigma_XV pinv(Sigma_VV) Sigma_VX
        """
        if not joint.rows:
            return joint.sxx.copy()
        projected = joint.sxv @ self._pinv_factor(joint.svv)
        conditional = joint.sxx - projected @ projected.T
        return 0.5 * (conditional + conditional.T)

    def log_det_dense(self, matrix: np.ndarray) -> float:
        try:
            factor, _ = la.cho_factor(matrix)
        except la.LinAlgError as e:
            logger.error(f"Cholesky failed on a {matrix.shape[0]}x{matrix.shape[0]} matrix: {str(e)}")
            raise NumericalError(f"Matrix is not positive definite: {str(e)}") from e
        return 2.0 * float(np.sum(np.log(np.diag(factor))))

    def berger_tung_rate(self, model: SourceModel, joint: JointCovariance) -> float:
        """
        1/2 log det Sigma / det Cov(X | V), in nats
        """
        conditional = self.conditional_covariance(joint)
        return 0.5 * (log_det(source_covariance(model)) - self.log_det_dense(conditional))

    def mmse_weights(self, model: SourceModel, scheme: AuxScheme) -> MmseWeights:
        if scheme.augment is not None:
            raise ParameterRangeError("Closed-form MMSE weights cover the unrefined schemes only")
        ell, m, rho, gamma = model.ell, validate_subset_size(model, scheme.m), model.rho, scheme.gamma
        if scheme.branch is Branch.MINUS:
            kappa = (1.0 - rho) / (gamma + binomial(ell - 2, m - 2) * ell * (1.0 - rho))
            return MmseWeights(branch=Branch.MINUS, kappa=kappa)

        eta = eta_coefficients(model, m)
        denominator = gamma * gamma + eta.eta2 * gamma + eta.eta1
        product = m * (1.0 - rho) * (1.0 + (ell - 1) * rho)
        alpha = ((1.0 + (m - 1) * rho) * gamma + binomial(ell - 2, m - 1) * product) / denominator
        beta = (m * rho * gamma - binomial(ell - 2, m - 2) * product) / denominator
        return MmseWeights(branch=Branch.PLUS, alpha=alpha, beta=beta)

    def estimator_matrix(self, model: SourceModel, scheme: AuxScheme, joint: JointCovariance) -> np.ndarray:
        """
        K with X estimate K V, built from the closed-form weights
        """
        weights = self.mmse_weights(model, scheme)
        gain = np.zeros((model.ell, len(joint.rows)))
        for column, row in enumerate(joint.rows):
            if weights.branch is Branch.MINUS:
                gain[row.subset[row.position], column] = weights.kappa
            else:
                for i in range(model.ell):
                    gain[i, column] = weights.alpha if i in row.subset else weights.beta
        return gain

    def orthogonality_residual(self, model: SourceModel, scheme: AuxScheme) -> float:
        """
        Largest entry of Cov(X - K V, V); zero for the MMSE estimator
        """
        joint = self.build_joint(model, scheme)
        gain = self.estimator_matrix(model, scheme, joint)
        return float(np.max(np.abs(joint.sxv - gain @ joint.svv)))

    def estimator_error_covariance(self, model: SourceModel, scheme: AuxScheme) -> np.ndarray:
        """
        Cov(X - K V) for the closed-form K
        """
        joint = self.build_joint(model, scheme)
        gain = self.estimator_matrix(model, scheme, joint)
        error = joint.sxx - gain @ joint.sxv.T - joint.sxv @ gain.T + gain @ joint.svv @ gain.T
        return 0.5 * (error + error.T)

    def _precision(self, covariance: np.ndarray) -> np.ndarray:
        try:
            factor = la.cho_factor(covariance)
        except la.LinAlgError as e:
            raise NumericalError(f"Conditional covariance is singular: {str(e)}") from e
        return la.cho_solve(factor, np.eye(covariance.shape[0]))

    def precision_additivity_residual(self, model: SourceModel, scheme: AuxScheme) -> float:
        """
        Refining with W_i = X_i + noise adds 1/sigma_W^2 to the conditional
        precision diagonal; returns the largest deviation from that
        """
        if scheme.augment is None:
            raise ParameterRangeError("Precision additivity needs an augmented scheme")
        refined = self.conditional_covariance(self.build_joint(model, scheme))
        base = self.conditional_covariance(self.build_joint(model, scheme.without_augment()))
        added = self._precision(refined) - self._precision(base)
        expected = np.eye(model.ell) / refinement_noise(model, scheme)
        return float(np.max(np.abs(added - expected)))

    def rate_for(self, model: SourceModel, scheme: AuxScheme) -> float:
        return self.berger_tung_rate(model, self.build_joint(model, scheme))


def relative_residual(value: float, reference: float) -> float:
    return abs(value - reference) / max(1.0, abs(reference))

