"""Scale-covariant moment features and a zoom-invariant glyph classifier.

Image moments against homogeneous monomials ``z1^p z2^q / (p+q)!`` turn an
image zoom ``z -> e^s z`` into the diagonal feature dilation
``x_i -> e^{(2 + r_i) s} x_i`` with ``r_i = p_i + q_i``.  A degree-0
homogeneous network over these features is therefore insensitive to zoom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..dilation import Dilation
from ..networks import LabeledDataset, random_features, train_hom
from ..rng import stream

GLYPH_SIZE = 100
TRAIN_SCALES = (1.0, 0.75, 0.5, 0.35)
TEST_SCALES = tuple(round(0.3 + 0.1 * i, 1) for i in range(18))
NOISE_SIGMA = 40.0
NOISE_FRACTION = 0.5
# reference length (pixels) and gray level used to bring features to O(1)
REF_LENGTH = 50.0
REF_GRAY = 255.0
CLASSIFIER_RIDGE = 1e-5


@dataclass(eq=False)
class GrayImage:
    """Gray-scale image with values in [0, 255]; 0 is white (empty)."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.size == 0:
            raise ValueError("image must be a non-empty 2-D array")
        if np.any(self.values < 0) or np.any(self.values > 255):
            raise ValueError("gray values must lie in [0, 255]")

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    def coordinates(self):
        """Pixel coordinates ``(z1, z2)`` relative to the image centre.

        ``z1`` runs along columns (left to right), ``z2`` along rows (bottom
        to top).
        """
        z1 = np.arange(self.width) - (self.width - 1) / 2.0
        z2 = (self.height - 1) / 2.0 - np.arange(self.height)
        return np.meshgrid(z1, z2)


@dataclass(frozen=True)
class MomentBasis:
    exponents: tuple = ((0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (0, 2), (2, 1), (1, 2))

    @property
    def degrees(self):
        return np.array([p + q for p, q in self.exponents], dtype=float)

    @property
    def generator(self):
        return np.diag(2.0 + self.degrees)

    def __len__(self):
        return len(self.exponents)


def moment_features(img, basis=MomentBasis()):
    """Discrete moments ``sum_pixels b_i(z) phi(z)``, ``b_i = z1^p z2^q / r!``."""
    Z1, Z2 = img.coordinates()
    phi = img.values
    return np.array([np.sum(Z1**p * Z2**q * phi) / math.factorial(p + q)
                     for p, q in basis.exponents])


def scale_image(img, factor):
    """Zoom about the image centre with bilinear interpolation."""
    if not 0.2 <= factor <= 3.0:
        raise ValueError(f"zoom factor {factor} outside [0.2, 3]")
    h, w = img.values.shape
    H, W = max(1, int(round(h * factor))), max(1, int(round(w * factor)))
    rows = (h - 1) / 2.0 + (np.arange(H) - (H - 1) / 2.0) / factor
    cols = (w - 1) / 2.0 + (np.arange(W) - (W - 1) / 2.0) / factor
    R, C = np.meshgrid(rows, cols, indexing="ij")
    out = ndimage.map_coordinates(img.values, [R, C], order=1, mode="constant", cval=0.0)
    return GrayImage(np.clip(out, 0.0, 255.0))


def add_noise(img, rng, sigma=NOISE_SIGMA, fraction=NOISE_FRACTION):
    """Gaussian noise on a random ``fraction`` of pixels, clamped to [0, 255]."""
    mask = rng.uniform(size=img.values.shape) < fraction
    noisy = img.values + mask * rng.normal(0.0, sigma, size=img.values.shape)
    return GrayImage(np.clip(noisy, 0.0, 255.0))


# -- synthetic glyphs ----------------------------------------------------------

# stroke polylines on a +-30 frame centred at the origin, z2 pointing up
_GLYPH_STROKES = {
    "L": [[(-18, 30), (-18, -30), (20, -30)]],
    "T": [[(-26, 30), (26, 30)], [(0, 30), (0, -30)]],
    "F": [[(20, 30), (-16, 30), (-16, -30)], [(-16, 2), (12, 2)]],
    "C": [[(22, 20), (10, 30), (-10, 30), (-22, 15), (-22, -15), (-10, -30), (10, -30), (22, -20)]],
    "J": [[(16, 30), (16, -18), (6, -30), (-10, -30), (-20, -18)]],
    "P": [[(-16, -30), (-16, 30), (10, 30), (20, 20), (20, 8), (10, -2), (-16, -2)]],
    "H": [[(-20, 30), (-20, -30)], [(20, 30), (20, -30)], [(-20, 0), (20, 0)]],
    "4": [[(12, -30), (12, 30), (-22, -6), (24, -6)]],
}
GLYPH_NAMES = tuple(_GLYPH_STROKES)


def _segment_distance(P, a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    t = np.clip(((P - a) @ ab) / (ab @ ab), 0.0, 1.0)
    return np.linalg.norm(P - (a + t[..., None] * ab), axis=-1)


def render_glyph(name, size=GLYPH_SIZE, width=24.0, blur=1.5, extent=1.2):
    """Render a synthetic glyph as bold anti-aliased strokes.

    Heavy strokes keep the glyph mass large next to the positive bias that
    clamped pixel noise adds to the white background.
    """
    img = GrayImage(np.zeros((size, size)))
    Z1, Z2 = img.coordinates()
    P = np.stack([Z1, Z2], axis=-1)
    dist = np.full(Z1.shape, np.inf)
    for line in _GLYPH_STROKES[name]:
        for a, b in zip(line[:-1], line[1:]):
            a, b = extent * np.asarray(a, float), extent * np.asarray(b, float)
            dist = np.minimum(dist, _segment_distance(P, a, b))
    ink = np.clip(width / 2.0 + 0.5 - dist, 0.0, 1.0)
    if blur > 0:
        ink = ndimage.gaussian_filter(ink, blur)
    return GrayImage(np.clip(255.0 * ink, 0.0, 255.0))


def synthetic_glyphs():
    return [render_glyph(name) for name in GLYPH_NAMES]


# -- classifier ------------------------------------------------------------

def feature_scale(basis=MomentBasis()):
    """Reference magnitudes ``c_i = 255 * 50^(2 + r_i) / r_i!`` of the moments."""
    r = basis.degrees
    return REF_GRAY * REF_LENGTH ** (2.0 + r) / np.array([math.factorial(int(k)) for k in r])


def normalized_features(img, basis=MomentBasis()):
    """Moments divided by ``feature_scale``.

    A fixed diagonal rescaling commutes with the diagonal feature dilation,
    so zoom covariance is kept while the network sees O(1) inputs.
    """
    return moment_features(img, basis) / feature_scale(basis)


def feature_dilation(basis=MomentBasis()):
    """Feature dilation ``diag(2 + r_i)`` acting on normalized moments."""
    return Dilation(basis.generator)


@dataclass
class RecognitionReport:
    train_accuracy: float
    zoom_accuracy: float
    noise_accuracy: float
    zoom_grid: list = field(default_factory=list)    # (scale, glyph, predicted)
    noise_grid: list = field(default_factory=list)   # (draw, glyph, predicted)
    analytic_invariant: bool = True

    def rows(self):
        yield ("kind", "scale_or_draw", "glyph", "predicted", "correct")
        for s, g, p in self.zoom_grid:
            yield ("zoom", repr(float(s)), g, p, int(g == p))
        for d, g, p in self.noise_grid:
            yield ("noise", str(d), g, p, int(g == p))


def build_classifier(glyphs, seed, n_hidden=8, basis=MomentBasis(), scales=TRAIN_SCALES,
                     ridge=CLASSIFIER_RIDGE):
    """Degree-0 homogeneous classifier trained on zoomed copies of ``glyphs``."""
    if len(glyphs) < 2:
        raise ValueError("need at least two glyph classes")
    k = len(glyphs)
    X, Y = [], []
    for label, img in enumerate(glyphs):
        for f in scales:
            scaled = img if f == 1.0 else scale_image(img, f)
            X.append(normalized_features(scaled, basis))
            Y.append(np.eye(k)[label])
    dil = feature_dilation(basis)
    A, b = random_features(len(basis), n_hidden, stream(seed, "recognition.features"))
    hnet = train_hom(A, b, "sigmoid", dil, 0.0, LabeledDataset(np.array(X), np.array(Y)), ridge=ridge, seed=seed)
    train_pred = np.argmax(hnet(np.array(X)), axis=1)
    train_acc = float(np.mean(train_pred == np.argmax(Y, axis=1)))
    return hnet, train_acc


def classify(hnet, img, basis=MomentBasis()):
    return int(np.argmax(hnet(normalized_features(img, basis))))


def recognition_harness(glyphs=None, seed=0, n_hidden=8, noise_draws=10, invariance_draws=100):
    """Train on four zoom levels, test on the zoom grid 30%..200% and on noise."""
    glyphs = synthetic_glyphs() if glyphs is None else list(glyphs)
    if len(glyphs) < 8:
        raise ValueError("recognition needs 8 glyph images")
    hnet, train_acc = build_classifier(glyphs, seed, n_hidden)
    zoom = []
    for f in TEST_SCALES:
        for label, img in enumerate(glyphs):
            zoom.append((f, label, classify(hnet, img if f == 1.0 else scale_image(img, f))))
    rng = stream(seed, "recognition.noise")
    noise = []
    for d in range(noise_draws):
        for label, img in enumerate(glyphs):
            noise.append((d, label, classify(hnet, add_noise(img, rng))))
    invariant = analytic_invariance(hnet, glyphs, stream(seed, "recognition.invariance"), invariance_draws)
    acc = lambda rows: float(np.mean([g == p for _, g, p in rows]))
    return RecognitionReport(train_acc, acc(zoom), acc(noise), zoom, noise, invariant)


def analytic_invariance(hnet, glyphs, rng, draws=100, s_range=(-3.0, 3.0)):
    """Check that labels survive exact feature dilation ``x -> d(s) x``."""
    X = np.array([normalized_features(img) for img in glyphs])
    base = np.argmax(hnet(X), axis=1)
    for s in rng.uniform(*s_range, size=draws):
        if not np.array_equal(np.argmax(hnet(hnet.dilation.apply(s, X)), axis=1), base):
            return False
    return True


# -- PGM I/O ---------------------------------------------------------------

def write_pgm(img, path, binary=True):
    data = np.clip(np.rint(img.values), 0, 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        if binary:
            fh.write(f"P5\n{w} {h}\n255\n".encode())
            fh.write(data.tobytes())
        else:
            fh.write(f"P2\n{w} {h}\n255\n".encode())
            for row in data:
                fh.write((" ".join(str(int(v)) for v in row) + "\n").encode())


def read_pgm(path):
    """Read an 8-bit binary (P5) or ASCII (P2) PGM file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise ValueError("only 8-bit PGM is supported")
    if magic == b"P5":
        data = np.frombuffer(raw[pos + 1:pos + 1 + w * h], dtype=np.uint8)
    elif magic == b"P2":
        data = np.array(raw[pos:].split()[: w * h], dtype=np.int64)
    else:
        raise ValueError(f"unsupported PGM magic {magic!r}")
    if data.size != w * h:
        raise ValueError("truncated PGM data")
    return GrayImage(data.reshape(h, w).astype(float) * (255.0 / maxval))
