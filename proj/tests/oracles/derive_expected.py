"""High-precision reference values frozen into the C++ tests.

Computed with mpmath at 50 digits straight from the radius laws and the
correction polynomial, independent of the C++ implementation.
"""
from mpmath import mp, mpf, pi, atan, atan2, sqrt, sin, tan, asin, cos

mp.dps = 50


def radius(model, c, phi):
    return {
        "equidistant": c * phi,
        "stereographic": 2 * c * tan(phi / 2),
        "equisolid": 2 * c * sin(phi / 2),
        "orthographic": c * sin(phi),
    }[model]


def delta(A, B, C, x, y):
    r2 = x * x + y * y
    rad = A[0] * r2 + A[1] * r2**2 + A[2] * r2**3
    dx = x * rad + B[0] * (r2 + 2 * x * x) + 2 * B[1] * x * y + C[0] * x + C[1] * y
    dy = y * rad + 2 * B[0] * x * y + B[1] * (r2 + 2 * y * y)
    return dx, dy


def project(model, c, pp, p, A=(0, 0, 0), B=(0, 0), C=(0, 0)):
    x, y, z = map(mpf, p)
    rho = sqrt(x * x + y * y)
    phi = atan2(rho, z)
    r = radius(model, c, phi)
    ox, oy = r * x / rho, r * y / rho
    dx, dy = delta(A, B, C, ox, oy)
    return pp[0] + ox + dx, pp[1] + oy + dy


print("equidistant c=100 phi=pi/2:", radius("equidistant", 100, pi / 2))
print("equisolid c=100 phi=pi/4:", radius("equisolid", 100, pi / 4))
print("delta A1=1e-7 p=(100,0):", delta((mpf("1e-7"), 0, 0), (0, 0), (0, 0), mpf(100), mpf(0)))
print("delta C2=0.01 p=(0,50):", delta((0, 0, 0), (0, 0), (0, mpf("0.01")), mpf(0), mpf(50)))
print("project (1,0,1):", project("equidistant", 100, (256, 256), (1, 0, 1)))
print("project (1,1,1):", project("equidistant", 100, (0, 0), (1, 1, 1)))
print("phi of (1,1,1):", atan(sqrt(2)))
print("project (1,0,-1):", project("equidistant", 100, (0, 0), (1, 0, -1)), "3pi/4*c =", 100 * 3 * pi / 4)
print("project (1,1,1) A1=1e-8:", project("equidistant", 100, (0, 0), (1, 1, 1), A=(mpf("1e-8"), 0, 0)))
# Letterbox 300x600 -> 512: width
print("300*512/600 =", mpf(300) * 512 / 600)
# Image circle for inscribed equidistant vs orthographic, output 512, phi_max 92.5 / 90
phim = mpf("92.5") * pi / 180
c_eq = 256 / phim
print("inscribed c equidistant:", c_eq)
print("orthographic radius at phi_max 90 with c_eq:", radius("orthographic", c_eq, pi / 2))
# uniform [0, 85.333] mean and sigma of the mean over 1e4 samples
hi = mpf(512) / 6
print("uniform mean:", hi / 2, "sigma of mean (n=1e4):", hi / sqrt(12) / 100)
