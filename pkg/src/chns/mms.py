"""Manufactured solution machinery for the convergence study.

The analytic fields are a smooth phase profile, a divergence-free swirl
velocity vanishing on the boundary of the unit square, and a zero-mean
pressure. The chemical potential is defined scheme-consistently as
mu = lam * (-laplace(phi) + G'(phi)), and the forcing terms are the
pointwise residuals of the coupled model in these fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PI = np.pi


@dataclass
class MmsCase:
    """Closed-form fields, gradients, and forcing of one manufactured run."""

    phi: object
    mu: object
    u: object
    p: object
    grad_phi: object
    grad_mu: object
    grad_u: object   # nested [component][direction]
    grad_p: object
    g_phi: object
    g_u: object
    r_exact_density: object  # F(phi(t)) pointwise, for the exact scalar history
    u_squared: object


def trig_case(params) -> MmsCase:
    """The standard trigonometric case on the unit square."""
    lam, eps, mob, nu = params.lam, params.eps, params.mobility, params.nu
    gamma = params.gamma

    def ax(x, y):
        return np.cos(PI * x) * np.cos(PI * y)

    def grad_ax(x, y):
        return (-PI * np.sin(PI * x) * np.cos(PI * y),
                -PI * np.cos(PI * x) * np.sin(PI * y))

    def phi(t, x, y):
        return 2.0 + np.sin(t) * ax(x, y)

    def grad_phi(t, x, y):
        gx, gy = grad_ax(x, y)
        s = np.sin(t)
        return s * gx, s * gy

    def mu(t, x, y):
        f = phi(t, x, y)
        return lam * (2.0 * PI ** 2 * np.sin(t) * ax(x, y) + (f ** 3 - f) / eps ** 2)

    def grad_mu(t, x, y):
        f = phi(t, x, y)
        gx, gy = grad_ax(x, y)
        s = np.sin(t)
        factor = lam * s * (2.0 * PI ** 2 + (3.0 * f ** 2 - 1.0) / eps ** 2)
        return factor * gx, factor * gy

    def laplace_mu(t, x, y):
        s = np.sin(t)
        f = phi(t, x, y)
        a = ax(x, y)
        grad_a_sq = PI ** 2 * (np.sin(PI * x) ** 2 * np.cos(PI * y) ** 2
                               + np.cos(PI * x) ** 2 * np.sin(PI * y) ** 2)
        return lam * (-4.0 * PI ** 4 * s * a
                      + ((3.0 * f ** 2 - 1.0) * (-2.0 * PI ** 2 * s * a)
                         + 6.0 * f * s ** 2 * grad_a_sq) / eps ** 2)

    def u(t, x, y):
        s = np.sin(t)
        return (PI * np.sin(PI * x) ** 2 * np.sin(2 * PI * y) * s,
                -PI * np.sin(PI * y) ** 2 * np.sin(2 * PI * x) * s)

    def u_t(t, x, y):
        c = np.cos(t)
        return (PI * np.sin(PI * x) ** 2 * np.sin(2 * PI * y) * c,
                -PI * np.sin(PI * y) ** 2 * np.sin(2 * PI * x) * c)

    def grad_u(t, x, y):
        s = np.sin(t)
        d1x = PI ** 2 * np.sin(2 * PI * x) * np.sin(2 * PI * y) * s
        d1y = 2 * PI ** 2 * np.sin(PI * x) ** 2 * np.cos(2 * PI * y) * s
        d2x = -2 * PI ** 2 * np.sin(PI * y) ** 2 * np.cos(2 * PI * x) * s
        d2y = -PI ** 2 * np.sin(2 * PI * y) * np.sin(2 * PI * x) * s
        return ((d1x, d1y), (d2x, d2y))

    def laplace_u(t, x, y):
        s = np.sin(t)
        l1 = 2 * PI ** 3 * s * np.sin(2 * PI * y) * (np.cos(2 * PI * x)
                                                     - 2 * np.sin(PI * x) ** 2)
        l2 = -2 * PI ** 3 * s * np.sin(2 * PI * x) * (np.cos(2 * PI * y)
                                                      - 2 * np.sin(PI * y) ** 2)
        return l1, l2

    def p(t, x, y):
        return np.cos(PI * x) * np.sin(PI * y) * np.sin(t)

    def grad_p(t, x, y):
        s = np.sin(t)
        return (-PI * np.sin(PI * x) * np.sin(PI * y) * s,
                PI * np.cos(PI * x) * np.cos(PI * y) * s)

    def g_phi(t, x, y):
        u1, u2 = u(t, x, y)
        px, py = grad_phi(t, x, y)
        phit = np.cos(t) * ax(x, y)
        return phit + u1 * px + u2 * py - mob * laplace_mu(t, x, y)

    def g_u(t, x, y):
        u1, u2 = u(t, x, y)
        (d1x, d1y), (d2x, d2y) = grad_u(t, x, y)
        ut1, ut2 = u_t(t, x, y)
        l1, l2 = laplace_u(t, x, y)
        px, py = grad_p(t, x, y)
        fx, fy = grad_phi(t, x, y)
        m = mu(t, x, y)
        g1 = ut1 + u1 * d1x + u2 * d1y - nu * l1 + px - m * fx
        g2 = ut2 + u1 * d2x + u2 * d2y - nu * l2 + py - m * fy
        return g1, g2

    def r_exact_density(t, x, y):
        f = phi(t, x, y)
        return (f ** 2 - 1.0) ** 2 / (4.0 * eps ** 2) - 0.5 * gamma * f ** 2

    def u_squared(t, x, y):
        u1, u2 = u(t, x, y)
        return u1 ** 2 + u2 ** 2

    return MmsCase(phi=phi, mu=mu, u=u, p=p,
                   grad_phi=grad_phi, grad_mu=grad_mu, grad_u=grad_u, grad_p=grad_p,
                   g_phi=g_phi, g_u=g_u,
                   r_exact_density=r_exact_density, u_squared=u_squared)


def mms_forcing(t, x, y, params):
    """Pointwise forcing values of the standard case at (t, x, y)."""
    case = trig_case(params)
    return case.g_phi(t, x, y), case.g_u(t, x, y)


def finite_difference_forcing(case: MmsCase, params, t, x, y,
                              dx: float = 1e-5, dt: float = 1e-6):
    """Forcing recomputed by central differences on the analytic fields.

    Independent cross-check of the closed-form derivatives in g_phi/g_u;
    agreement is limited by the stencil, not the implementation.
    """
    mob, nu = params.mobility, params.nu

    def ddt(f):
        return (np.asarray(f(t + dt, x, y)) - np.asarray(f(t - dt, x, y))) / (2 * dt)

    def grad_fd(f):
        return ((np.asarray(f(t, x + dx, y)) - np.asarray(f(t, x - dx, y))) / (2 * dx),
                (np.asarray(f(t, x, y + dx)) - np.asarray(f(t, x, y - dx))) / (2 * dx))

    def laplace_fd(f):
        return (np.asarray(f(t, x + dx, y)) + np.asarray(f(t, x - dx, y))
                + np.asarray(f(t, x, y + dx)) + np.asarray(f(t, x, y - dx))
                - 4.0 * np.asarray(f(t, x, y))) / dx ** 2

    u1, u2 = case.u(t, x, y)
    gpx, gpy = grad_fd(case.phi)
    g_phi = ddt(case.phi) + u1 * gpx + u2 * gpy - mob * laplace_fd(case.mu)

    ut = ddt(case.u)
    gu1 = grad_fd(lambda tt, xx, yy: case.u(tt, xx, yy)[0])
    gu2 = grad_fd(lambda tt, xx, yy: case.u(tt, xx, yy)[1])
    lu1 = laplace_fd(lambda tt, xx, yy: case.u(tt, xx, yy)[0])
    lu2 = laplace_fd(lambda tt, xx, yy: case.u(tt, xx, yy)[1])
    gp = grad_fd(case.p)
    m = case.mu(t, x, y)
    g1 = ut[0] + u1 * gu1[0] + u2 * gu1[1] - nu * lu1 + gp[0] - m * gpx
    g2 = ut[1] + u1 * gu2[0] + u2 * gu2[1] - nu * lu2 + gp[1] - m * gpy
    return g_phi, (g1, g2)
