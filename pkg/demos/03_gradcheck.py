# %% [markdown]
# # Checking the hand-written backward passes
# Every backward pass is compared against central finite differences in
# double precision.

# %%
import numpy as np

from pnsnet.gradcheck import finite_diff_grad, gradcheck_suite, random_ns_params
from pnsnet.ns_block import ns_backward, ns_forward

rng = np.random.default_rng(0)

# %% One gradient by hand
p = random_ns_params(rng, 4, 1, 1)
X = rng.normal(size=(3, 3, 3, 4))
R = rng.normal(size=X.shape)
analytic, _ = ns_backward(X, p, R)
numeric = finite_diff_grad(lambda x: float(np.sum(R * ns_forward(x, p))), X, index=np.arange(6))
print("analytic", analytic.ravel()[:6])
print("numeric ", numeric.ravel()[:6])

# %% The whole suite
for r in gradcheck_suite(seed=0, tol=1e-4):
    print(f"{'ok ' if r.passed else 'BAD'} {r.op_name:24s} {r.max_rel_error:.2e}")
