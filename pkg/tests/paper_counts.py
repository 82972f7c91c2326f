"""Published comparison counts, frozen for the golden regression tests.

Three candidate register-based censuses are compared against one
traditional census of 182,614 people: frameworks 1-4 on the single 2019
register, frameworks 1-4 on the pooled 2017-2019 registers, and
framework 5 on the pooled registers.
"""

AGE_LABELS = [
    "0-4", "5-9", "10-14", "15-19", "20-24", "25-29", "30-34", "35-39",
    "40-44", "45-49", "50-54", "55-59", "60-64", "65-69", ">=70",
]

T_SIZE = 182614
T_SEX = {"F": 94702, "M": 87912}
T_AGE_COUNTS = [
    3274, 8026, 8891, 9400, 9564, 11511, 11830, 13652,
    15026, 15348, 16848, 16095, 12962, 10461, 19726,
]
T_AGE = dict(zip(AGE_LABELS, T_AGE_COUNTS))

R2019 = {
    "label": "Framework 1-4 from the 2019 R-census",
    "r_size": 365394,
    "t_and_r": 125729,
    "sex": {"F": 186601, "M": 178793},
    "age_counts": [
        2830, 16642, 20112, 21166, 22325, 24021, 24669, 26947,
        29722, 30453, 32504, 30027, 24842, 19535, 39599,
    ],
}

R1719 = {
    "label": "Framework 1-4 from the 2017-2019 R-census",
    "r_size": 419492,
    "t_and_r": 131592,
    "sex": {"F": 214044, "M": 205448},
    "age_counts": [
        10476, 21679, 24003, 24022, 27083, 28421, 29016, 32543,
        34574, 35294, 36607, 31547, 25778, 19939, 38510,
    ],
}

R5 = {
    "label": "Framework 5 from the 2017-2019 R-census",
    "r_size": 393034,
    "t_and_r": 124467,
    "sex": {"F": 200588, "M": 192446},
    "age_counts": [
        8402, 19727, 22206, 22381, 25028, 26271, 26887, 30431,
        32696, 33402, 34879, 30158, 24719, 19189, 36658,
    ],
}

CANDIDATES = (R2019, R1719, R5)

for _candidate in CANDIDATES:
    _candidate["age"] = dict(zip(AGE_LABELS, _candidate["age_counts"]))

# Printed golden values: (coverage, overcoverage, chd2 sex, chd2 age,
# chi2 sex, chi2 age) in candidate order.
PRINTED_COVERAGE = (0.688496, 0.720602, 0.681585)
PRINTED_OVERCOVERAGE = (0.655908, 0.686306, 0.683317)
PRINTED_CHD2_SEX = (6.257e-5, 6.97037e-5, 6.78432e-5)
PRINTED_CHD2_AGE = (0.003051, 0.004243, 0.003021)
PRINTED_CHI2_SEX = (30.439, 35.467, 33.830)
PRINTED_CHI2_AGE = (1629.30, 2149.47, 1507.43)
PRINTED_AVERAGE_RANKS = (1.5, 2.5, 2.0)
