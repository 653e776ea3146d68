#!/usr/bin/env python3
"""Independent reference implementations of PSNR, SSIM, UIQM, and UCIQE.

Written in plain Python (no numpy) directly from the published metric
definitions. The printed values are frozen into the Rust unit tests.

Conventions shared with the library:
- images are H x W x C in [0, 1], C = 3 (or 1 for SSIM/PSNR);
- SSIM: Gaussian 11x11 window (sigma 1.5), valid windows only,
  C1 = 0.01^2, C2 = 0.03^2;
- UCIQE = 0.4680 * std(chroma)/100 + 0.2745 * (P99(L) - P1(L))/100
        + 0.2576 * mean(HSV saturation), Lab chroma/luminance on the
  D65 sRGB conversion, percentiles with linear interpolation;
- UIQM = 0.0282 * UICM + 0.2953 * UISM + 3.5753 * UIConM with
  alpha-trimmed colorfulness (alpha = 0.1), Sobel-EME sharpness
  (8x8 blocks, symmetric-padded Sobel), and Michelson logAMEE contrast
  over 8x8 blocks spanning all channels.
"""

import math

# ----------------------------------------------------------- color helpers

def srgb_to_linear(u):
    return u / 12.92 if u <= 0.04045 else ((u + 0.055) / 1.055) ** 2.4

XN, YN, ZN = 0.95047, 1.0, 1.08883
D = 6 / 29

def lab_f(t):
    return t ** (1 / 3) if t > D ** 3 else t / (3 * D * D) + 4 / 29

def rgb_to_lab(r, g, b):
    rl, gl, bl = srgb_to_linear(r), srgb_to_linear(g), srgb_to_linear(b)
    x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl
    y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl
    z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl
    fx, fy, fz = lab_f(x / XN), lab_f(y / YN), lab_f(z / ZN)
    return 116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz)

# ------------------------------------------------------------- test images

def ramp16():
    return [[[i / 15, j / 15, (i + j) / 30] for j in range(16)] for i in range(16)]

def checker16():
    img = []
    for i in range(16):
        row = []
        for j in range(16):
            v = 0.9 if ((i // 8) + (j // 8)) % 2 else 0.2
            row.append([v, 0.8 * v, 0.6 * v])
        img.append(row)
    return img

def halfhalf16():
    return [[[0.9, 0.2, 0.1] if j < 8 else [0.1, 0.3, 0.8] for j in range(16)]
            for i in range(16)]

def sin32():
    return [[[0.5 + 0.5 * math.sin(2 * math.pi * i / 8),
              0.5 + 0.5 * math.cos(2 * math.pi * j / 8),
              0.5] for j in range(32)] for i in range(32)]

def hash16():
    def v(c, i, j):
        t = math.sin((c * 256 + i * 16 + j + 1) * 12.9898) * 43758.5453
        return t - math.floor(t)
    return [[[v(c, i, j) for c in range(3)] for j in range(16)] for i in range(16)]

def anti_pair16():
    a = [[[0.5 + 0.4 * math.sin(2 * math.pi * (i + j) / 8)] for j in range(16)]
         for i in range(16)]
    b = [[[0.5 - 0.4 * math.sin(2 * math.pi * (i + j) / 8)] for j in range(16)]
         for i in range(16)]
    return a, b

# ----------------------------------------------------------------- metrics

def psnr(x, r):
    n = err = 0
    for xi, ri in zip(x, r):
        for xp, rp in zip(xi, ri):
            for xv, rv in zip(xp, rp):
                err += (xv - rv) ** 2
                n += 1
    mse = err / n
    if mse == 0:
        return 99.0
    return min(99.0, 10 * math.log10(1.0 / mse))

def gaussian_window(size=11, sigma=1.5):
    r = (size - 1) / 2
    g = [[math.exp(-((i - r) ** 2 + (j - r) ** 2) / (2 * sigma * sigma))
          for j in range(size)] for i in range(size)]
    s = sum(sum(row) for row in g)
    return [[v / s for v in row] for row in g]

def ssim(x, r, size=11, sigma=1.5, c1=0.01 ** 2, c2=0.03 ** 2):
    h, w, ch = len(x), len(x[0]), len(x[0][0])
    win = gaussian_window(size, sigma)
    total = 0.0
    count = 0
    for c in range(ch):
        for i in range(h - size + 1):
            for j in range(w - size + 1):
                mx = my = exx = eyy = exy = 0.0
                for a in range(size):
                    for b in range(size):
                        wv = win[a][b]
                        xv = x[i + a][j + b][c]
                        rv = r[i + a][j + b][c]
                        mx += wv * xv
                        my += wv * rv
                        exx += wv * xv * xv
                        eyy += wv * rv * rv
                        exy += wv * xv * rv
                vx = exx - mx * mx
                vy = eyy - my * my
                cov = exy - mx * my
                num = (2 * mx * my + c1) * (2 * cov + c2)
                den = (mx * mx + my * my + c1) * (vx + vy + c2)
                total += num / den
                count += 1
    return total / count

def percentile(values, q):
    v = sorted(values)
    pos = q * (len(v) - 1)
    i = int(math.floor(pos))
    if i >= len(v) - 1:
        return v[-1]
    frac = pos - i
    return v[i] + frac * (v[i + 1] - v[i])

def uciqe(img):
    chroma, lum, sat = [], [], []
    for row in img:
        for (r, g, b) in row:
            l, a, bb = rgb_to_lab(r, g, b)
            chroma.append(math.sqrt(a * a + bb * bb) / 100.0)
            lum.append(l / 100.0)
            mx, mn = max(r, g, b), min(r, g, b)
            sat.append(0.0 if mx <= 0 else (mx - mn) / mx)
    n = len(chroma)
    mu_c = sum(chroma) / n
    sigma_c = math.sqrt(sum((c - mu_c) ** 2 for c in chroma) / n)
    con_l = percentile(lum, 0.99) - percentile(lum, 0.01)
    mu_s = sum(sat) / n
    return 0.4680 * sigma_c + 0.2745 * con_l + 0.2576 * mu_s

def alpha_trimmed_mean(values, alpha=0.1):
    v = sorted(values)
    k = int(math.floor(alpha * len(v)))
    kept = v[k:len(v) - k]
    return sum(kept) / len(kept)

def uicm(img):
    rg, yb = [], []
    for row in img:
        for (r, g, b) in row:
            rg.append(r - g)
            yb.append((r + g) / 2 - b)
    mu_rg = alpha_trimmed_mean(rg)
    mu_yb = alpha_trimmed_mean(yb)
    var_rg = sum((v - mu_rg) ** 2 for v in rg) / len(rg)
    var_yb = sum((v - mu_yb) ** 2 for v in yb) / len(yb)
    return (-0.0268 * math.sqrt(mu_rg ** 2 + mu_yb ** 2)
            + 0.1586 * math.sqrt(var_rg + var_yb))

def sobel_magnitude(plane):
    h, w = len(plane), len(plane[0])
    def at(i, j):
        # symmetric reflection: -1 -> 0, h -> h-1
        ii = -i - 1 if i < 0 else (2 * h - i - 1 if i >= h else i)
        jj = -j - 1 if j < 0 else (2 * w - j - 1 if j >= w else j)
        return plane[ii][jj]
    gxk = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]
    gyk = [[-1, -2, -1], [0, 0, 0], [1, 2, 1]]
    out = [[0.0] * w for _ in range(h)]
    for i in range(h):
        for j in range(w):
            gx = gy = 0.0
            for a in range(3):
                for b in range(3):
                    v = at(i + a - 1, j + b - 1)
                    gx += gxk[a][b] * v
                    gy += gyk[a][b] * v
            out[i][j] = math.sqrt(gx * gx + gy * gy)
    return out

EPS = 1e-12

def eme(plane, block=8):
    h, w = len(plane), len(plane[0])
    k1, k2 = h // block, w // block
    if k1 == 0 or k2 == 0:
        return 0.0
    total = 0.0
    for bi in range(k1):
        for bj in range(k2):
            mx, mn = -1e300, 1e300
            for i in range(bi * block, bi * block + block):
                for j in range(bj * block, bj * block + block):
                    mx = max(mx, plane[i][j])
                    mn = min(mn, plane[i][j])
            if mn > EPS and mx > EPS:
                total += math.log(mx / mn)
    return 2.0 / (k1 * k2) * total

def uism(img):
    h, w = len(img), len(img[0])
    weights = [0.299, 0.587, 0.114]
    total = 0.0
    for c in range(3):
        plane = [[img[i][j][c] for j in range(w)] for i in range(h)]
        mag = sobel_magnitude(plane)
        enhanced = [[plane[i][j] * mag[i][j] for j in range(w)] for i in range(h)]
        total += weights[c] * eme(enhanced)
    return total

def uiconm(img, block=8):
    h, w = len(img), len(img[0])
    k1, k2 = h // block, w // block
    if k1 == 0 or k2 == 0:
        return 0.0
    total = 0.0
    for bi in range(k1):
        for bj in range(k2):
            mx, mn = -1e300, 1e300
            for i in range(bi * block, bi * block + block):
                for j in range(bj * block, bj * block + block):
                    for c in range(3):
                        mx = max(mx, img[i][j][c])
                        mn = min(mn, img[i][j][c])
            top, bot = mx - mn, mx + mn
            if top > EPS and bot > EPS:
                wgt = top / bot
                total += wgt * math.log(wgt)
    return -total / (k1 * k2)

def uiqm(img):
    return 0.0282 * uicm(img) + 0.2953 * uism(img) + 3.5753 * uiconm(img)

# ------------------------------------------------------------------ report

if __name__ == "__main__":
    images = {
        "ramp16": ramp16(),
        "checker16": checker16(),
        "halfhalf16": halfhalf16(),
        "sin32": sin32(),
        "hash16": hash16(),
    }
    for name, img in images.items():
        print("uicm(%-10s) = %.12f" % (name, uicm(img)))
        print("uism(%-10s) = %.12f" % (name, uism(img)))
        print("uiconm(%-10s) = %.12f" % (name, uiconm(img)))
        print("uiqm(%-10s) = %.12f" % (name, uiqm(img)))
        print("uciqe(%-10s) = %.12f" % (name, uciqe(img)))
    print("ssim(ramp16, checker16) = %.12f" % ssim(images["ramp16"], images["checker16"]))
    print("ssim(hash16, ramp16)    = %.12f" % ssim(images["hash16"], images["ramp16"]))
    a, b = anti_pair16()
    print("ssim(anti a, anti b)    = %.12f" % ssim(a, b))
    off = [[[v * 0.8 + 0.1 for v in px] for px in row] for row in images["ramp16"]]
    base = [[[v * 0.8 for v in px] for px in row] for row in images["ramp16"]]
    print("psnr(base, base+0.1)    = %.12f" % psnr(base, off))
    print("psnr(ramp16, ramp16)    = %.12f" % psnr(images["ramp16"], images["ramp16"]))
