"""Demo 2: rank pooling a frame sequence into one dynamic image.

A dynamic image is the weight vector of a linear ranker trained to put
the video's prefix-mean features in temporal order: pixels that brighten
over time come out positive, pixels that darken come out negative, and
static pixels come out zero.

Run:  python3 demos/02_rank_pooling.py
"""

import numpy as np

from tcdcnet.rankpool import (
    RankPoolProblem,
    dynamic_image_sequence,
    normalize_dynamic_image,
    prefix_means,
    rank_svm_solve,
)

# --- scalar example with a known optimum --------------------------------
frames = [np.array([v], dtype=np.float32) for v in (1.0, 2.0, 3.0)]
for delta in (10.0, 1.0):
    w = rank_svm_solve(RankPoolProblem(prefix_means(frames), delta)).d
    print(f"frames [1,2,3], delta={delta:>4}: dynamic 'image' = {w[0]:+.3f}")
w = rank_svm_solve(RankPoolProblem(
    prefix_means(list(reversed(frames))), 10.0)).d
print(f"frames [3,2,1], delta=10.0: dynamic 'image' = {w[0]:+.3f} "
      "(order reversed, sign flips)")
print()

# --- image example: one pixel brightens, one darkens, rest static -------
T = 9
seq = []
for t in range(T):
    img = np.full((5, 5), 0.5, dtype=np.float32)
    img[1, 1] = t / (T - 1)        # brightens
    img[3, 3] = 1.0 - t / (T - 1)  # darkens
    seq.append(img)

dis = dynamic_image_sequence(seq, window=T)
d = dis[0].d
print("5x5 sequence, brightening pixel at (1,1), darkening at (3,3):")
print(np.array2string(d, precision=2, suppress_small=True))
print(f"  d[1,1] = {d[1, 1]:+.2f} (positive), d[3,3] = {d[3, 3]:+.2f} "
      f"(negative), static pixels = {d[0, 0]:+.2f}")
print()

norm = normalize_dynamic_image(d)
print("after min-max normalization to [0,1]:")
print(f"  min={norm.min():.2f} max={norm.max():.2f} "
      f"static pixels -> {norm[0, 0]:.2f}")

# --- sliding windows -----------------------------------------------------
dis = dynamic_image_sequence(seq, window=7, stride=1)
print()
print(f"sliding window 7 / stride 1 over {T} frames -> {len(dis)} dynamic "
      f"images, origins {[di.window_origin for di in dis]}")
