"""scikit-learn style front end for the scaled hull of a Gaussian sample."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .geometry import Ellipsoid, convex_hull, hausdorff_support, scale, unit_directions
from .regions import b_normalizer


class ScaledHullEstimator(TransformerMixin, BaseEstimator):
    """Convex hull of a sample scaled by ``1 / b(n_samples)``.

    Parameters
    ----------
    sigma : array-like of shape (n_features, n_features), default=None
        Covariance of the marginal law. ``None`` estimates it from the data
        passed to :meth:`fit`.
    n_directions : int, default=None
        Size of the direction grid used for Hausdorff distances; ``None``
        means 720 in 2D and 2048 above.

    Attributes
    ----------
    scale_ : float
        ``b(n_samples)``.
    hull_ : ConvexBody
        Hull of ``X / scale_``.
    ellipsoid_ : Ellipsoid
        Concentration ellipsoid of the (given or estimated) covariance.
    directions_ : ndarray of shape (n_directions, n_features)
    """

    def __init__(self, sigma=None, n_directions=None):
        self.sigma = sigma
        self.n_directions = n_directions

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=1)
        self.n_features_in_ = X.shape[1]
        if self.sigma is None:
            sigma = np.atleast_2d(np.cov(X, rowvar=False)) if len(X) > 1 else np.eye(X.shape[1])
        else:
            sigma = check_array(self.sigma)
            if sigma.shape != (X.shape[1], X.shape[1]):
                raise ValueError(
                    f"sigma has shape {sigma.shape}, expected {(X.shape[1], X.shape[1])}"
                )
        self.ellipsoid_ = Ellipsoid.from_sigma(sigma)
        self.scale_ = b_normalizer(len(X))
        self.hull_ = scale(convex_hull(X), 1.0 / self.scale_)
        self.directions_ = unit_directions(X.shape[1], self.n_directions)
        return self

    def transform(self, X):
        """Divide by the fitted normalizer ``b(n_samples)``."""
        check_is_fitted(self, "hull_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X / self.scale_

    def support(self, directions):
        check_is_fitted(self, "hull_")
        directions = check_array(directions)
        return self.hull_.support_values(directions)

    def hausdorff_to_ellipsoid(self) -> float:
        check_is_fitted(self, "hull_")
        return hausdorff_support(self.hull_, self.ellipsoid_, self.directions_)

    def score(self, X, y=None) -> float:
        """Negative Hausdorff distance of the scaled hull of ``X`` to the
        fitted ellipsoid (larger is better)."""
        check_is_fitted(self, "hull_")
        X = check_array(X)
        hull = scale(convex_hull(X), 1.0 / b_normalizer(len(X)))
        return -hausdorff_support(hull, self.ellipsoid_, self.directions_)
