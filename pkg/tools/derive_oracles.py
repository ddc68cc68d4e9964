"""Compute the hand-derived reference values frozen into the test suite.

Uses exact rationals and 40-digit decimals from the standard library only,
so none of these numbers pass through the package or through numpy.
Run: python3 tools/derive_oracles.py
"""
from decimal import Decimal, getcontext
from fractions import Fraction as F

getcontext().prec = 40
D = Decimal


def ln(x) -> Decimal:
    return D(x).ln()


def show(name, value):
    print(f"{name:<34} {value}")


# matrix product [[1,2],[3,4]] @ [[5,6],[7,8]]
A, B = [[1, 2], [3, 4]], [[5, 6], [7, 8]]
show("matmul", [[sum(A[i][t] * B[t][j] for t in range(2)) for j in range(2)] for i in range(2)])
show("dense [1,1]@[[1],[1]]+0.5", F(1) + F(1) + F(1, 2))
# averaging 3x3 kernel on a constant 4x4 image with zero 'same' padding: count taps inside
taps = [[sum(1 for di in (-1, 0, 1) for dj in (-1, 0, 1) if 0 <= i + di < 4 and 0 <= j + dj < 4)
         for j in range(4)] for i in range(4)]
show("avg3x3 on 4x4 ones (x/9)", [[str(F(t, 9)) for t in row] for row in taps])
show("mse [1,0,1,0] vs [.5,0,.5,0]", sum((F(a) - F(b)) ** 2 for a, b in [(1, F(1, 2)), (0, 0), (1, F(1, 2)), (0, 0)]) / 4)
show("bce x=1 x'=0.5 (ln 2)", ln(2))
show("sparse quadratic (0.1-0.2)^2", (F(1, 10) - F(2, 10)) ** 2)
show("sparse kl rho=.1 rho1=.5", D("0.1") * ln(D("0.2")) + D("0.9") * ln(D("1.8")))
show("contractive sigmoid'(0)^2", F(1, 4) ** 2)
show("vae kl mu=1 logvar=0", F(1, 2) * (1 + 1 - 0 - 1))
show("sgd 1 - 0.1*2", F(1) - F(1, 10) * 2)
show("rmse [0,0] vs [3,4]", (D(9 + 16) / 2).sqrt())
show("mae [0,0] vs [3,4]", F(3 + 4, 2))
show("cosine [1,0] vs [1,1]", 1 - 1 / D(2).sqrt())
# tf-idf toy: vocabulary a..e, corpus of 3 docs, cluster = docs 0 and 1
corpus = [{"a": 2, "b": 1}, {"a": 1, "c": 3}, {"d": 1, "e": 2, "a": 1}]
N = len(corpus)
for term in "abcde":
    tf = corpus[0].get(term, 0) + corpus[1].get(term, 0)
    df = sum(1 for doc in corpus if term in doc)
    show(f"tfidf cluster{{0,1}} term {term}", tf * max(D(0), ln(D(N) / (1 + df))))
show("threshold errors [0,2] k=6", 1 + 6 * D(2).sqrt())
show("hidden_width(100, 2) sqrt(200)", D(200).sqrt())
show("noise reduction 1-25/100", 1 - F(25, 100))
show("minmax (4-2)/(6-2)", F(4 - 2, 6 - 2))
# zero_mask p=0.1 over 1e6 coordinates: 6-sigma binomial band on the fraction
sd = (D("0.1") * D("0.9") / D(10 ** 6)).sqrt()
show("zero_mask 6-sigma band", (D("0.1") - 6 * sd, D("0.1") + 6 * sd))
# code_noise sigma=.2 from 1e5 draws: sd of the sample std ~ sigma / sqrt(2n)
show("std-of-std sigma=.2 n=1e5", D("0.2") / (2 * D(10 ** 5)).sqrt())
# sample_latent mean from 1e5 N(0,1) draws: sd 1/sqrt(n)
show("sd of mean n=1e5", 1 / D(10 ** 5).sqrt())
# Cauchy median of 1e6 draws: sd of sample median = pi*scale/(2 sqrt(n))
show("sd of cauchy median n=1e6", D("3.14159265358979323846") / (2 * D(10 ** 6).sqrt()))
# SVG: 3 points (0,0),(1,2),(2,1) in plot area x in [48,432], y in [312,48]
for x, y in [(0, 0), (1, 2), (2, 1)]:
    show(f"svg point ({x},{y})", (48 + F(x, 2) * 384, 312 - F(y, 2) * 264))
