"""Extensions as block matrices.

A coboundary class (data coming from a power series H) gives a split
extension, and split_section finds such an H back.  Adding a constant
class breaks splitting.  Two sections of the same extension give cocycles
that differ by a coboundary.
"""
import random

from ltphigamma.lubin_tate import LubinTateData
from ltphigamma.phigamma import (
    add_ext,
    coboundary,
    constant_class,
    ext_pull,
    ext_push,
    mixed_character,
    random_power_series_matrix,
    rank1_from_character,
    split_section,
)

W = 20
rng = random.Random(11)
lt = LubinTateData(3, 2, window=W)
D = rank1_from_character(lt, mixed_character(lt, 1, 0, 2, 3))

H = random_power_series_matrix(lt, 1, 1, rng, W)
data = coboundary(D, D, H)
found = split_section(D, D, data)
print("coboundary class splits:", found is not None)
print("  recovered H gives the same cocycle:", found is not None and coboundary(D, D, found).equals(data))

bent = add_ext(constant_class(D, 1, 1, 0), data)
print("after adding a constant class, splits:", split_section(D, D, bent) is not None)

Dt = ext_push(D, D, data)
S1 = random_power_series_matrix(lt, 1, 1, rng, W)
S2 = random_power_series_matrix(lt, 1, 1, rng, W)
diff = ext_pull(Dt, S1).sub(ext_pull(Dt, S2))
print("two sections differ by a coboundary:", diff.equals(coboundary(D, D, [[S1[0][0] - S2[0][0]]])))
