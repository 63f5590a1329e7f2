"""Optimizers."""
from abc import ABC, abstractmethod
import numpy as np


class Optimizer(ABC):
    """
    Base class for optimizers.

    An optimizer owns the update rule and learning rate schedule for a set of
    named parameter arrays. All optimizers must define an init method, which
    may call :meth:`Optimizer.__init__` using `super()`, and a call method
    which updates the parameters in place given their gradients.
    """

    @abstractmethod
    def __init__(self, lr, lr_halve_every=None):
        """
        Create an :class:`Optimizer` object.

        This method should be implemented in every concrete optimizer.

        :arg float lr: The base learning rate.
        :arg int lr_halve_every: Halve the learning rate every this many
            epochs, or never when None.

        :returns: An :class:`Optimizer` object
        """
        if lr < 0:
            raise ValueError(f"lr must be >= 0 (got {lr})")
        if lr_halve_every is not None and lr_halve_every < 1:
            raise ValueError(
                f"lr_halve_every must be >= 1 (got {lr_halve_every})")
        self.base_lr = lr
        self.lr_halve_every = lr_halve_every
        self.epoch = 0

    @abstractmethod
    def __call__(self, parameters, gradients):
        """
        Conduct one update step.

        This method should be implemented in every concrete optimizer.

        :arg dict parameters: Parameter arrays, updated in place.
        :arg dict gradients: Gradient arrays with the same keys and shapes.
        """

    def learning_rate(self, epoch=None):
        """
        Return the learning rate of an epoch (counted from 0).

        :arg int epoch: The epoch, or None for the current epoch.

        :rtype: float
        """
        if epoch is None:
            epoch = self.epoch
        if self.lr_halve_every is None:
            return self.base_lr
        return self.base_lr * 0.5 ** (epoch // self.lr_halve_every)

    def set_epoch(self, epoch):
        """Move the schedule to `epoch`."""
        self.epoch = epoch


class SGDMomentum(Optimizer):
    r"""
    Stochastic gradient descent with classic momentum.

    The update is given by,

    .. math::
        v \leftarrow \mu v - \eta g, \quad \theta \leftarrow \theta + v,

    where :math:`\mu` is the momentum, :math:`\eta` the learning rate of the
    current epoch and :math:`g` the gradient. Velocities start at zero.
    """

    def __init__(self, lr, momentum=0.9, lr_halve_every=None):
        """
        Create an :class:`SGDMomentum` optimizer object.

        :arg float lr: The base learning rate.
        :arg float momentum: The momentum, in [0, 1).
        :arg int lr_halve_every: Halve the learning rate every this many
            epochs, or never when None.

        :returns: An :class:`SGDMomentum` object
        """
        super().__init__(lr, lr_halve_every)
        if not (0.0 <= momentum < 1.0):
            raise ValueError(f"momentum must be in [0, 1) (got {momentum})")
        self.momentum = momentum
        self.velocity = {}

    def __call__(self, parameters, gradients):
        """
        Conduct one update step.

        :arg dict parameters: Parameter arrays, updated in place.
        :arg dict gradients: Gradient arrays with the same keys and shapes.
        """
        lr = self.learning_rate()
        for name, theta in parameters.items():
            g = gradients[name]
            if g.shape != theta.shape:
                raise ValueError(
                    "gradient {} shape is wrong (expected {}, got {})".format(
                        name, theta.shape, g.shape))
            v = self.velocity.setdefault(name, np.zeros_like(theta))
            v *= self.momentum
            v -= lr * g
            theta += v
