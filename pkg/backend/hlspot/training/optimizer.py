import numpy as np


def step_decay(base_lr, factor, step, iteration):
    """lr = base · factor^(iteration // step)"""
    return base_lr * factor ** (iteration // step)


class Adam:
    """Adam com β = (0.9, 0.999) e ε = 1e-8 por padrão; parâmetros sem grad não mudam"""

    def __init__(self, named_params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(named_params)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params}

    def step(self, lr):
        self.t += 1
        bias1 = 1.0 - self.beta1 ** self.t
        bias2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params:
            if p.grad is None:
                continue
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * p.grad
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * p.grad ** 2
            update = (self.m[name] / bias1) / (np.sqrt(self.v[name] / bias2) + self.eps)
            p.data = p.data - lr * update

    def zero_grad(self):
        for _, p in self.params:
            p.zero_grad()
