from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y


class LogisticRegressionGD(ClassifierMixin, BaseEstimator):
    """L2-regularized logistic regression fitted by full-batch gradient descent.

    Features are standardized with the training mean and deviation; constant
    columns keep unit scale.
    """

    def __init__(self, learning_rate=0.1, n_iter=2000, alpha=1e-4, tol=1e-8):
        self.learning_rate = learning_rate
        self.n_iter = n_iter
        self.alpha = alpha
        self.tol = tol

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        self.classes_, y = np.unique(y, return_inverse=True)
        if len(self.classes_) != 2:
            raise ValueError("logistic regression needs exactly two classes")
        self.n_features_in_ = X.shape[1]
        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        self.scale_ = np.where(scale > 0, scale, 1.0)
        Z = (X - self.mean_) / self.scale_
        w = np.zeros(Z.shape[1])
        b = 0.0
        n = len(y)
        previous = np.inf
        for self.n_iter_ in range(1, self.n_iter + 1):
            p = _sigmoid(Z @ w + b)
            residual = p - y
            w -= self.learning_rate * (Z.T @ residual / n + self.alpha * w)
            b -= self.learning_rate * residual.mean()
            eps = 1e-12
            loss = -np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps))
            if abs(previous - loss) < self.tol:
                break
            previous = loss
        self.coef_ = w
        self.intercept_ = b
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float)
        return ((X - self.mean_) / self.scale_) @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        p1 = _sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return self.classes_[(self.predict_proba(X)[:, 1] >= 0.5).astype(int)]


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))
