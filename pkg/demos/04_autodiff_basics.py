"""The reverse-mode autodiff core, checked against finite differences.

Tensors hold float64 arrays; ops build a graph and backward() runs an
iterative topological sweep. gradcheck compares every analytic gradient to
a central finite difference.
"""

import numpy as np

from graphood.autodiff import (
    backward,
    gradcheck,
    matmul,
    reduce_mean,
    relu,
    segment_sum,
    tanh,
    tensor,
)


def main():
    rng = np.random.default_rng(0)
    W = tensor(rng.normal(size=(3, 4)))
    x = tensor(rng.normal(size=(5, 3)))

    loss = reduce_mean(tanh(relu(matmul(x, W))))
    backward(loss)
    print(f"loss = {float(loss.data):.6f}")
    print(f"dL/dW row 0: {[round(float(v), 4) for v in W.grad[0]]}")

    rel = gradcheck(lambda: reduce_mean(tanh(relu(matmul(x, W)))), [W, x])
    print(f"gradcheck max relative error: {rel:.2e}")

    # segment ops are how per-node messages aggregate over graphs
    msgs = tensor(np.arange(6.0).reshape(6, 1))
    seg = np.array([0, 0, 1, 1, 1, 2])
    pooled = segment_sum(msgs, seg, 3)
    print(f"segment_sum({msgs.data.ravel().tolist()}, {seg.tolist()}) "
          f"= {pooled.data.ravel().tolist()}")


if __name__ == "__main__":
    main()
