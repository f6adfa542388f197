"""How the reference codebook was chosen.

Every user repeats one QPSK point on both of its resources. On a resource
shared by three users, the r-th user is rotated by r * theta so that the three
points do not line up. A second knob relabels the QPSK points on the second
dimension (a permutation), which changes which joint frames end up close.

For each candidate we check that all M**J noiseless superpositions are
distinct, count frames that one-iteration Max-Log cannot recover without noise,
and measure BLER near the 1% operating point. The shipped codebook is the
rotation pi/7 with the identity permutation.

    python demos/codebook_design.py --frames 20000
"""

import argparse
import itertools

import numpy as np

from scmadec.channel import encode, superpose
from scmadec.decoder import DecoderConfig, all_frames, decode_noiseless_all
from scmadec.sim import simulate_point
from scmadec.system import ScmaSystem, layers_from_supports, reference_codebook_array, regular_supports


def build(rotation, perm):
    cb = reference_codebook_array(rotation=rotation, permutation=perm)
    return ScmaSystem(4, 2, 4, layers_from_supports(4, 2, regular_supports(4, 2), cb))


def min_distance(system):
    s = superpose(encode(system, all_frames(system)))
    # nearest neighbour over all pairs, in chunks to bound memory
    best = np.inf
    for a in range(0, len(s), 512):
        d = np.abs(s[a:a + 512, None, :] - s[None]) ** 2
        d = d.sum(axis=-1)
        d[d == 0] = np.inf
        best = min(best, d.min())
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--frames", type=int, default=5000)
    ap.add_argument("--snr", type=float, default=10.0)
    ap.add_argument("--all-perms", action="store_true", help="search all 24 permutations (slow)")
    args = ap.parse_args()

    rotations = [np.pi / d for d in (4, 5, 6, 7, 8)]
    perms = list(itertools.permutations(range(4))) if args.all_perms else [(0, 1, 2, 3), (0, 2, 3, 1), (3, 1, 2, 0)]
    cfg = DecoderConfig(max_iterations=5)
    rows = []
    for rot, perm in itertools.product(rotations, perms):
        system = build(rot, perm)
        frames, dec = decode_noiseless_all(system, DecoderConfig(max_iterations=1), N0=1e-3)
        failures = int((frames != dec).any(axis=1).sum())
        dmin = min_distance(system)
        (p,) = simulate_point(system, args.snr, [cfg], frames=args.frames, seed=11)
        rows.append((p.bler, rot, perm, dmin, failures))
        print(f"pi/{np.pi / rot:.0f}  perm {perm}  d2min {dmin:.3f}  noiseless failures {failures:5d}  "
              f"BLER@{args.snr:g}dB {p.bler:.4f}", flush=True)

    print("\nbest candidates with error-free noiseless recovery:")
    for bler, rot, perm, dmin, failures in sorted(r for r in rows if r[4] == 0)[:5]:
        print(f"  pi/{np.pi / rot:.0f} perm {perm}: BLER {bler:.4f} (d2min {dmin:.3f})")


if __name__ == "__main__":
    main()
