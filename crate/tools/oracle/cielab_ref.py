#!/usr/bin/env python3
"""Reference CIELAB (D65, sRGB) conversions, written independently with
plain scalar arithmetic. Prints the frozen constants used by the unit tests."""

def srgb_to_linear(u):
    return u / 12.92 if u <= 0.04045 else ((u + 0.055) / 1.055) ** 2.4

def linear_to_srgb(u):
    return 12.92 * u if u <= 0.0031308 else 1.055 * u ** (1 / 2.4) - 0.055

XN, YN, ZN = 0.95047, 1.0, 1.08883
D = 6 / 29

def f(t):
    return t ** (1 / 3) if t > D ** 3 else t / (3 * D * D) + 4 / 29

def finv(t):
    return t ** 3 if t > D else 3 * D * D * (t - 4 / 29)

def rgb_to_lab(r, g, b):
    rl, gl, bl = srgb_to_linear(r), srgb_to_linear(g), srgb_to_linear(b)
    x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl
    y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl
    z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl
    fx, fy, fz = f(x / XN), f(y / YN), f(z / ZN)
    return 116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz)

def lab_to_linear_rgb(l, a, b):
    fy = (l + 16) / 116
    fx = fy + a / 500
    fz = fy - b / 200
    x, y, z = XN * finv(fx), YN * finv(fy), ZN * finv(fz)
    rl = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z
    gl = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z
    bl = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z
    return rl, gl, bl

if __name__ == "__main__":
    print("L(0.5 gray)      = %.12f" % rgb_to_lab(0.5, 0.5, 0.5)[0])
    print("lab(0.5 gray)    =", rgb_to_lab(0.5, 0.5, 0.5))
    print("lab(white)       =", rgb_to_lab(1.0, 1.0, 1.0))
    rl, gl, bl = lab_to_linear_rgb(50, 80, 0)
    print("linear rgb(L=50,a=80,b=0) = %.12f %.12f %.12f" % (rl, gl, bl))
    srgb = [linear_to_srgb(max(u, 0.0)) for u in (rl, gl, bl)]
    print("srgb unclamped   = %.12f %.12f %.12f" % tuple(srgb))
