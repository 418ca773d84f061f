"""From grayscale video frames to an ordered point pattern of sweat spots.

Pipeline: :func:`background_correct` estimates the lighting from the first
frame, :func:`binarize_stack` runs a variance-split change-point search on
every pixel's scaled intensity series and keeps large darkening jumps, and
:func:`extract_spots` tracks the wet area frame by frame into spots whose
first-frame centroids form the pattern.

Image coordinates: pixel ``(row, col)`` has centre ``(x, y) = (col + 0.5,
row + 0.5)``, so a ``H x W`` frame maps onto the window ``[0, W] x [0, H]``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, TransformerMixin

from .core import PointPattern, Window

DEFAULT_SIGMA = 100.0
DEFAULT_MIN_SPOT = 20
DEFAULT_MERGE_RADIUS = 15.0
LIGHTING_FLOOR = 1e-6
#: leading ones prepended to every series
N_PAD = 3
EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class NoWetPixelsError(ValueError):
    """The binary stack contains no wet pixel."""


@dataclass(frozen=True)
class ChangePointResult:
    t_star: int
    mean_diff: float
    f_min: float


def background_correct(first_frame, sigma: float = DEFAULT_SIGMA) -> np.ndarray:
    """Lighting field: Gaussian smoothing of the first frame.

    The kernel is truncated at the image border and renormalised by the
    kernel mass that falls inside, so a constant frame is returned
    unchanged. Inputs are clamped to at least ``1e-6``.
    """
    sigma = float(sigma)
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    img = np.asarray(first_frame, dtype=float)
    if img.ndim != 2:
        raise ValueError("first_frame must be a 2-D array")
    img = np.maximum(img, LIGHTING_FLOOR)
    num = ndimage.gaussian_filter(img, sigma, mode="constant", cval=0.0)
    den = ndimage.gaussian_filter(np.ones_like(img), sigma, mode="constant", cval=0.0)
    return np.maximum(num / den, LIGHTING_FLOOR)


def _change_points(series: np.ndarray):
    """Vectorised change-point search along axis 0 of a ``T x ...`` array."""
    T = series.shape[0]
    pad = np.ones((N_PAD,) + series.shape[1:])
    x = np.concatenate([pad, series], axis=0)
    zero = np.zeros((1,) + series.shape[1:])
    c1 = np.concatenate([zero, np.cumsum(x, axis=0)])
    c2 = np.concatenate([zero, np.cumsum(x * x, axis=0)])
    N = T + N_PAD
    # left segment is x[0 : t + 3], right is x[t + 3 : N], t = 1..T-1
    t = np.arange(1, T)
    shape = (T - 1,) + (1,) * (series.ndim - 1)
    nl = (t + N_PAD).reshape(shape).astype(float)
    nr = (N - t - N_PAD).reshape(shape).astype(float)
    sl, ql = c1[t + N_PAD], c2[t + N_PAD]
    sr, qr = c1[N] - sl, c2[N] - ql
    ml, mr = sl / nl, sr / nr
    f = (ql / nl - ml * ml) + (qr / nr - mr * mr)
    k = np.argmin(f, axis=0)  # first minimum on ties
    take = lambda a: np.take_along_axis(a, k[None], axis=0)[0]
    return k + 1, take(mr) - take(ml), take(f)


def pixel_change_point(series) -> ChangePointResult:
    """Change point of one pixel's series ``x_1..x_T``.

    Three ones are prepended and ``t`` in ``1..T-1`` minimising the sum of
    the two segment variances (divisor = segment length) is returned, the
    smallest on ties, with ``mean_diff`` the right-segment mean minus the
    left-segment mean.
    """
    x = np.asarray(series, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("a change point needs a series of length >= 2")
    t, d, f = _change_points(x)
    return ChangePointResult(int(t), float(d), float(f))


def change_point_map(stack):
    """Per-pixel ``(t_star, mean_diff, f_min)`` arrays for a ``T x H x W`` stack."""
    stack = np.asarray(stack, dtype=float)
    if stack.ndim != 3 or stack.shape[0] < 2:
        raise ValueError("stack must be T x H x W with T >= 2")
    return _change_points(stack)


def _check_stack(stack) -> np.ndarray:
    stack = np.asarray(stack, dtype=float)
    if stack.ndim != 3 or stack.shape[0] < 1:
        raise ValueError("frame stack must be a non-empty T x H x W array")
    if not np.all(np.isfinite(stack)) or np.any(stack < 0):
        raise ValueError("frame intensities must be finite and non-negative")
    return stack


def binarize_stack(stack, lighting, threshold: float, closing: bool = True) -> np.ndarray:
    """Binary ``T x H x W`` wet mask.

    A pixel is wet from frame ``t_star + 1`` on when its scaled series
    ``g_t / l`` drops by at least ``threshold`` in mean at the change
    point. Each frame is then closed with a 3 x 3 square (if ``closing``)
    and wetness is made permanent in time.
    """
    stack = _check_stack(stack)
    threshold = float(threshold)
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    lighting = np.asarray(lighting, dtype=float)
    if lighting.shape != stack.shape[1:]:
        raise ValueError(f"lighting shape {lighting.shape} does not match frames {stack.shape[1:]}")
    if not np.all(lighting > 0):
        raise ValueError("lighting must be strictly positive")
    T = stack.shape[0]
    if T < 2:
        return np.zeros(stack.shape, dtype=bool)
    t_star, mean_diff, _ = change_point_map(stack / lighting)
    wet_pixel = mean_diff <= -threshold
    frames = np.arange(T).reshape(T, 1, 1)
    # frame index i (0-based) is frame i + 1; wet when i + 1 > t_star
    wet = wet_pixel[None] & (frames >= t_star[None])
    if closing:
        for i in range(T):
            wet[i] = ndimage.grey_closing(wet[i].view(np.uint8), size=(3, 3), mode="nearest").astype(bool)
    return np.logical_or.accumulate(wet, axis=0)


def extract_spots(
    binary,
    min_spot: int = DEFAULT_MIN_SPOT,
    merge_radius: float = DEFAULT_MERGE_RADIUS,
    return_labels: bool = False,
):
    """Track the wet area into spots and return their ordered locations.

    Connected components (8-neighbour) of the first frame's wet area seed
    the spots. In every later frame each newly wet pixel joins the spot
    owning the nearest already-labelled pixel if that is within
    ``merge_radius``; the remaining new pixels form new spots by connected
    components. Spots with fewer than ``min_spot`` pixels at the end are
    dropped.

    Each spot is represented by the centroid of its pixels in its first
    frame. Points are ordered by first frame, then by final size (larger
    first), then by centroid.
    """
    wet = np.asarray(binary, dtype=bool)
    if wet.ndim != 3:
        raise ValueError("binary stack must be T x H x W")
    if not wet.any():
        raise NoWetPixelsError("no wet pixels in the binary stack")
    T, H, W = wet.shape
    labels = np.zeros((H, W), dtype=np.int64)
    first_frame: list[int] = []
    first_centroid: list[tuple[float, float]] = []
    prev = np.zeros((H, W), dtype=bool)

    def seed(mask, t):
        comp, k = ndimage.label(mask, structure=EIGHT_CONNECTED)
        if k == 0:
            return
        base = len(first_frame)
        idx = np.arange(1, k + 1)
        rows = ndimage.mean(np.indices((H, W))[0], comp, idx)
        cols = ndimage.mean(np.indices((H, W))[1], comp, idx)
        labels[comp > 0] = comp[comp > 0] + base
        for r, c in zip(rows, cols):
            first_frame.append(t)
            first_centroid.append((c + 0.5, r + 0.5))

    for t in range(T):
        new = wet[t] & ~prev & (labels == 0)
        if new.any() and labels.any():
            dist, (ri, ci) = ndimage.distance_transform_edt(labels == 0, return_indices=True)
            near = new & (dist <= merge_radius)
            labels[near] = labels[ri[near], ci[near]]
            new &= ~near
        if new.any():
            seed(new, t)
        prev = wet[t] | prev

    if not first_frame:
        raise NoWetPixelsError("no spots found")
    sizes = np.bincount(labels.ravel(), minlength=len(first_frame) + 1)[1:]
    keep = [i for i in range(len(first_frame)) if sizes[i] >= min_spot]
    keep.sort(key=lambda i: (first_frame[i], -sizes[i], first_centroid[i]))
    pts = np.array([first_centroid[i] for i in keep], dtype=float).reshape(-1, 2)
    pattern = PointPattern(pts, Window(float(W), float(H)))
    if return_labels:
        remap = np.zeros(len(first_frame) + 1, dtype=np.int64)
        remap[[i + 1 for i in keep]] = np.arange(1, len(keep) + 1)
        return pattern, remap[labels]
    return pattern


def threshold_sweep(stack, lighting, thresholds, min_spot=DEFAULT_MIN_SPOT, merge_radius=DEFAULT_MERGE_RADIUS):
    """``(threshold, wet pixels in the last frame, spots)`` for each
    threshold, to help pick one by eye."""
    stack = _check_stack(stack)
    rows = []
    for th in thresholds:
        wet = binarize_stack(stack, lighting, th)
        n = extract_spots(wet, min_spot, merge_radius).n if wet.any() else 0
        rows.append((float(th), int(wet[-1].sum()), n))
    return rows


# --------------------------------------------------------------------------
# frame stack I/O


def read_stack(path) -> np.ndarray:
    """Read a frame stack scaled to ``[0, 1]``.

    ``path`` is either a directory of 8-bit grayscale PGM frames (read in
    lexicographic order) or a raw file whose first line is a JSON header
    ``{"T", "H", "W", "dtype"}`` followed by the C-ordered array bytes.
    """
    path = Path(path)
    if path.is_dir():
        from PIL import Image

        files = sorted(p for p in path.iterdir() if p.suffix.lower() == ".pgm")
        if not files:
            raise FileNotFoundError(f"no .pgm frames in {path}")
        frames = []
        for f in files:
            with Image.open(f) as im:
                if im.mode not in ("L", "I", "I;16", "I;16B"):
                    raise ValueError(f"{f} is not a grayscale image (mode {im.mode})")
                a = np.asarray(im)
            scale = 255.0 if a.dtype == np.uint8 else 65535.0
            frames.append(a.astype(float) / scale)
        shapes = {fr.shape for fr in frames}
        if len(shapes) != 1:
            raise ValueError(f"frames differ in size: {sorted(shapes)}")
        return np.stack(frames)
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        dtype = np.dtype(header["dtype"])
        shape = (int(header["T"]), int(header["H"]), int(header["W"]))
        data = np.frombuffer(fh.read(), dtype=dtype)
    if data.size != np.prod(shape):
        raise ValueError(f"raw file holds {data.size} values, header says {shape}")
    data = data.reshape(shape).astype(float)
    if dtype == np.uint8:
        data /= 255.0
    return data


def write_raw_stack(stack, path, dtype="uint8") -> Path:
    """Write a stack in the raw format read by :func:`read_stack`;
    ``uint8`` output takes values in ``[0, 1]`` and rescales them."""
    path = Path(path)
    stack = np.asarray(stack, dtype=float)
    T, H, W = stack.shape
    if np.dtype(dtype) == np.uint8:
        data = np.clip(np.rint(stack * 255), 0, 255).astype(np.uint8)
    else:
        data = stack.astype(dtype)
    with open(path, "wb") as fh:
        fh.write((json.dumps({"T": T, "H": H, "W": W, "dtype": np.dtype(dtype).name}) + "\n").encode())
        fh.write(np.ascontiguousarray(data).tobytes())
    return path


def write_pgm_stack(stack, directory, prefix: str = "frame") -> list[Path]:
    """Write each frame (values in ``[0, 1]`` or boolean) as an 8-bit PGM."""
    from PIL import Image

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stack = np.asarray(stack)
    width = max(4, len(str(stack.shape[0])))
    out = []
    for i, frame in enumerate(stack):
        a = np.clip(np.rint(np.asarray(frame, float) * 255), 0, 255).astype(np.uint8)
        p = directory / f"{prefix}{i:0{width}d}.pgm"
        Image.fromarray(a, mode="L").save(p)
        out.append(p)
    return out


# --------------------------------------------------------------------------
# scikit-learn style wrappers


class ChangePointBinarizer(TransformerMixin, BaseEstimator):
    """Frame stack to wet mask; the lighting is learned from the first frame.

    Parameters
    ----------
    threshold : float
        Minimum drop in mean scaled intensity at the change point.
    sigma : float
        Gaussian smoothing scale of the lighting estimate, in pixels.
    closing : bool
        Apply a 3 x 3 morphological closing per frame.
    """

    def __init__(self, threshold=0.1, sigma=DEFAULT_SIGMA, closing=True):
        self.threshold = threshold
        self.sigma = sigma
        self.closing = closing

    def fit(self, X, y=None):
        stack = _check_stack(X)
        self.lighting_ = background_correct(stack[0], self.sigma)
        return self

    def transform(self, X):
        if not hasattr(self, "lighting_"):
            from sklearn.exceptions import NotFittedError

            raise NotFittedError("call fit before transform")
        return binarize_stack(X, self.lighting_, self.threshold, self.closing)


class SpotExtractor(BaseEstimator):
    """Binary stack to ordered spot pattern (``predict``)."""

    def __init__(self, min_spot=DEFAULT_MIN_SPOT, merge_radius=DEFAULT_MERGE_RADIUS):
        self.min_spot = min_spot
        self.merge_radius = merge_radius

    def fit(self, X, y=None):
        return self

    def predict(self, X) -> PointPattern:
        return extract_spots(X, self.min_spot, self.merge_radius)
