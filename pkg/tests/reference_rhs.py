"""Straight-line evaluation of the Picard remainders from raw stencils.

Nothing here goes through the package's sparse assembly: derivatives are
taken on ghost-padded arrays, transposes are written out by hand and the
Neumann Poisson problem is solved with a type-II cosine transform, which
diagonalises the five-point Laplacian with mirror ghosts exactly.
"""
import numpy as np
from scipy.fft import dctn, idctn


def _pad_x(f, r_lo, r_hi):
    return np.concatenate([(r_lo * f[0])[None], f, (r_hi * f[-1])[None]], axis=0)


def _pad_y(f, r_lo, r_hi):
    return np.concatenate([(r_lo * f[:, 0])[:, None], f, (r_hi * f[:, -1])[:, None]], axis=1)


def ddx(f, h, r_lo=1.0, r_hi=1.0):
    fp = _pad_x(f, r_lo, r_hi)
    return (fp[2:] - fp[:-2]) / (2 * h)


def ddy(f, h, r_lo=1.0, r_hi=1.0):
    fp = _pad_y(f, r_lo, r_hi)
    return (fp[:, 2:] - fp[:, :-2]) / (2 * h)


def ddx_T(s, h, r_lo=1.0, r_hi=1.0):
    """Transpose of :func:`ddx` applied to ``s``."""
    z = np.zeros_like(s[:1])
    sp = np.concatenate([z, s, z], axis=0)
    out = (sp[:-2] - sp[2:]) / (2 * h)
    out[0] -= r_lo * s[0] / (2 * h)
    out[-1] += r_hi * s[-1] / (2 * h)
    return out


def ddy_T(s, h, r_lo=1.0, r_hi=1.0):
    z = np.zeros_like(s[:, :1])
    sp = np.concatenate([z, s, z], axis=1)
    out = (sp[:, :-2] - sp[:, 2:]) / (2 * h)
    out[:, 0] -= r_lo * s[:, 0] / (2 * h)
    out[:, -1] += r_hi * s[:, -1] / (2 * h)
    return out


def grad(f, hx, hy):
    return np.stack([ddx(f, hx), ddy(f, hy)])


def div(v, hx, hy):
    return ddx(v[0], hx, -1.0, -1.0) + ddy(v[1], hy, -1.0, -1.0)


def flux_div(c, f, hx, hy):
    """Five-point ``div(c grad f)`` with averaged face coefficients, zero wall flux."""
    nx, ny = f.shape
    out = np.zeros_like(f)
    cx = 0.5 * (c[1:] + c[:-1])
    fx = cx * (f[1:] - f[:-1]) / hx
    out[:-1] += fx / hx
    out[1:] -= fx / hx
    cy = 0.5 * (c[:, 1:] + c[:, :-1])
    fy = cy * (f[:, 1:] - f[:, :-1]) / hy
    out[:, :-1] += fy / hy
    out[:, 1:] -= fy / hy
    return out


def lap(f, hx, hy):
    fx = _pad_x(f, 1.0, 1.0)
    fy = _pad_y(f, 1.0, 1.0)
    return ((fx[2:] - 2 * f + fx[:-2]) / hx ** 2 + (fy[:, 2:] - 2 * f + fy[:, :-2]) / hy ** 2)


def poisson_dct(f, hx, hy):
    """Mean-zero ``q`` with ``lap(q) = f - mean(f)``."""
    nx, ny = f.shape
    lx = (2 * np.cos(np.pi * np.arange(nx) / nx) - 2) / hx ** 2
    ly = (2 * np.cos(np.pi * np.arange(ny) / ny) - 2) / hy ** 2
    lam = lx[:, None] + ly[None, :]
    fh = dctn(f, type=2, norm="ortho")
    fh[0, 0] = 0.0
    lam[0, 0] = 1.0
    return idctn(fh / lam, type=2, norm="ortho")


def density(phi, eps):
    return eps / 2 * phi + 1 + eps / 2


def viscosity(phi, nu):
    return (nu - 1) / 2 * phi + (nu + 1) / 2


def viscous_apply(u, eta, weight, a0, hx, hy):
    """``K u`` for the stress form with Navier-slip ghosts and wall friction."""
    def r(e, h):
        return (2 * e - a0 * h) / (2 * e + a0 * h)

    rl, rr = r(eta[0], hx), r(eta[-1], hx)
    rb, rt = r(eta[:, 0], hy), r(eta[:, -1], hy)
    a = ddx(u[0], hx, -1.0, -1.0)
    b = ddy(u[0], hy, rb, rt)
    c = ddx(u[1], hx, rl, rr)
    d = ddy(u[1], hy, -1.0, -1.0)
    e = eta * weight
    sa = e * (4 / 3 * a - 2 / 3 * d)
    sbc = e * (b + c)
    sd = e * (-2 / 3 * a + 4 / 3 * d)
    kx = ddx_T(sa, hx, -1.0, -1.0) + ddy_T(sbc, hy, rb, rt)
    ky = ddx_T(sbc, hx, rl, rr) + ddy_T(sd, hy, -1.0, -1.0)
    w = weight * np.ones_like(eta)
    kx[:, 0] += a0 * w[:, 0] * (0.5 * (1 + rb)) ** 2 / hy * u[0][:, 0]
    kx[:, -1] += a0 * w[:, -1] * (0.5 * (1 + rt)) ** 2 / hy * u[0][:, -1]
    ky[0, :] += a0 * w[0, :] * (0.5 * (1 + rl)) ** 2 / hx * u[1][0, :]
    ky[-1, :] += a0 * w[-1, :] * (0.5 * (1 + rr)) ** 2 / hx * u[1][-1, :]
    return np.stack([kx, ky])


def reference_F1(u, phi, phi_old, eps, nu, a0, gravity, Lx, Ly):
    nx, ny = phi.shape
    hx, hy = Lx / nx, Ly / ny
    alpha = -eps / (2 + eps)
    rho = density(phi, eps)
    eta = viscosity(phi, nu)

    # skew convection
    m = rho * u
    div_m = div(m, hx, hy)
    conv = np.empty_like(u)
    for i in range(2):
        adv = u[0] * ddx(u[i], hx) + u[1] * ddy(u[i], hy)
        conv[i] = 0.5 * rho * adv + 0.5 * div(m * u[i], hx, hy) - 0.5 * u[i] * div_m

    f = phi ** 3 - phi
    cap = (phi - 1 / alpha) * grad(f - lap(phi, hx, hy), hx, hy)
    q = poisson_dct(div(u, hx, hy), hx, hy)
    qp = grad(q, hx, hy) / alpha ** 2
    visc = viscous_apply(u, eta, 1.0, a0, hx, hy)
    R = -(conv + cap + qp + visc) / rho
    if gravity:
        z = np.broadcast_to((np.arange(ny) + 0.5) * hy, (nx, ny))
        R = R - grad(z, hx, hy)

    rho0 = density(phi_old, eps)
    eta0 = viscosity(phi_old, nu)
    c0 = (1 / alpha - phi_old) / rho0
    K0u = viscous_apply(u, eta0, 1.0 / rho0, a0, hx, hy)
    Hd = grad(flux_div(c0, phi - phi_old, hx, hy), hx, hy)
    return R + K0u + Hd


def reference_F2(u, phi, Lx, Ly):
    nx, ny = phi.shape
    r = -div(phi * u, Lx / nx, Ly / ny)
    return r - r.mean()
