"""Constants produced by tools/gen_cone_constants.py; do not edit by hand.

Scan: 1000000 cone samples per entry, seed 20240817.
INTERP_C0 stores observed_min * 0.99 (comment shows the raw minimum).
"""

INTERP_C0 = {
    (2, 2): 0.99,  # observed min 1.0
    (3, 2): 0.99,  # observed min 1.0
    (3, 3): 1.71473037130167,  # observed min 1.732050880102697
    (4, 2): 0.99,  # observed min 1.0
    (4, 3): 1.4850036408598937,  # observed min 1.5000036776362562
    (4, 4): 2.494647535803303,  # observed min 2.519845995760912
    (5, 2): 0.99,  # observed min 1.0
    (5, 3): 1.400090489839845,  # observed min 1.4142328180200454
    (5, 4): 1.9800725976859335,  # observed min 2.0000733309958925
    (5, 5): 3.310389284933458,  # observed min 3.3438275605388466
    (6, 2): 0.99,  # observed min 1.0
    (6, 3): 1.3556561847932724,  # observed min 1.3693496816093662
    (6, 4): 1.7916679906539263,  # observed min 1.8097656471251782
    (6, 5): 2.4752432756531357,  # observed min 2.5002457329829655
    (6, 6): 4.15141270365794,  # observed min 4.19334616531105
}

# Observed minimum of f_j / sum(f_i) over Gamma samples with kappa_j < 0,
# per dimension; the implemented bound constant is 1/(n(n-1)).
DELTA0_OBSERVED_MIN_SHARE = {
    3: 0.4000087970251407,
    4: 0.2727425383682594,
    5: 0.2105599322872019,
    6: 0.1724673798640096,
}
