"""Hand-computed feature rows for the toy circuits under the stimuli in
conftest.TOY_STIMULI. Column order follows fdrlab.features.FEATURE_NAMES.

Derivations (Q sampled before each clock edge, all FFs start at 0):

shift3, d = 1 0 1 1 0 0 1 0
  FF0 Q = 0 1 0 1 1 0 0 1   zeros 4/8, 5 changes
  FF1 Q = 0 0 1 0 1 1 0 0   zeros 5/8, 4 changes
  FF2 Q = 0 0 0 1 0 1 1 0   zeros 5/8, 4 changes
toggle, 4 cycles: Q = 0 1 0 1
gated, a&b = 1 0 0 1 1 0 -> Q = 0 1 0 0 1 1
ring3, in = 1 0 0 0 0 0
  FF_a Q = 0 1 0 0 1 0, FF_b Q = 0 0 1 0 0 1, FF_c Q = 0 0 0 1 0 0
bus4, rst_n = 0 1 1 1 1 1 0 1, en = 1 1 1 0 1 1 1 1
  sampled count = 0 0 1 2 2 3 4 0 (reset is synchronous)
  bit0 = 0 0 1 0 0 1 0 0, bit1 = 0 0 0 1 1 1 0 0, bit2 = 0 0 0 0 0 0 1 0, bit3 = 0
  comb cone of bit i's D: x_i plus the carry ANDs a_1..a_i
  comb cone of bit i's Q: x_i, a_(i+1)..a_3, x_(i+1)..x_3 and tc_and
"""
from fractions import Fraction as F

#        fan   cones  pi po  pi-prox   po-prox   bus        const loop    drv  comb     r0       r1       chg
TABLES = {
    "shift3": {
        "FF0": (0, 1, 0, 2, 1, 0, 1, 1, 1, 3, 3, 3, 0, -1, 0, 0, 0, -1, 1, 0, 0, 0, F(4, 8), F(4, 8), 5),
        "FF1": (1, 1, 1, 1, 0, 0, 2, 2, 2, 2, 2, 2, 0, -1, 0, 0, 0, -1, 1, 0, 0, 0, F(5, 8), F(3, 8), 4),
        "FF2": (1, 0, 2, 0, 0, 1, 3, 3, 3, 1, 1, 1, 0, -1, 0, 0, 0, -1, 1, 0, 0, 0, F(5, 8), F(3, 8), 4),
    },
    "toggle": {
        "tff": (1, 1, 1, 1, 0, 1, -1, -1, -1, 1, 1, 1, 0, -1, 0, 0, 1, 1, 1, 1, 1, 1, F(1, 2), F(1, 2), 3),
    },
    "gated": {
        "g": (0, 0, 0, 0, 2, 1, 1, 1, 1, 1, 1, 1, 0, -1, 0, 0, 0, -1, 1, 1, 0, 0, F(3, 6), F(3, 6), 3),
    },
    "ring3": {
        "FF_a": (1, 1, 3, 3, 1, 0, 1, 1, 1, 3, 3, 3, 0, -1, 0, 0, 1, 3, 1, 1, 0, 0, F(4, 6), F(2, 6), 4),
        "FF_b": (1, 1, 3, 3, 0, 0, 2, 2, 2, 2, 2, 2, 0, -1, 0, 0, 1, 3, 1, 0, 0, 0, F(4, 6), F(2, 6), 3),
        "FF_c": (1, 1, 3, 3, 0, 1, 3, 3, 3, 1, 1, 1, 0, -1, 0, 0, 1, 3, 1, 0, 1, 1, F(5, 6), F(1, 6), 2),
    },
    "bus4": {
        "cnt_reg[0]": (1, 4, 1, 4, 2, 1, 1, 1, 1, 1, 1, 1, 1, 0, 4, 0, 1, 1, 2, 1, 8, 4, F(6, 8), F(2, 8), 4),
        "cnt_reg[1]": (2, 3, 2, 3, 2, 1, 1, 1, 1, 1, 1, 1, 1, 1, 4, 0, 1, 1, 2, 2, 6, 3, F(5, 8), F(3, 8), 2),
        "cnt_reg[2]": (3, 2, 3, 2, 2, 1, 1, 1, 1, 1, 1, 1, 1, 2, 4, 0, 1, 1, 2, 3, 4, 2, F(7, 8), F(1, 8), 2),
        "cnt_reg[3]": (4, 1, 4, 1, 2, 1, 1, 1, 1, 1, 1, 1, 1, 3, 4, 0, 1, 1, 4, 4, 2, 1, F(8, 8), F(0, 8), 0),
    },
}
