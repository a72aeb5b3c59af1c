import numpy as np

from greendc.basic_typing import Matrix, Vector


GREEN = 0
BROWN = 1
SUPPLY_NAMES = ('green', 'brown')


class Allocation:
    """
    Decision variables of one slot: the request rate and the service rate of the green and brown queue of
    every (data center, class) pair.

    All arrays are shaped [nb_dcs, nb_classes], in requests/second.

    The flat vector layout used by the optimizer stores, for every queue ``q``, the pair
    ``(lambda_q, mu_q)`` at positions ``(2q, 2q + 1)`` with
    ``q = supply * nb_dcs * nb_classes + dc * nb_classes + class``, ``supply`` being ``GREEN`` or ``BROWN``.
    """
    def __init__(self, green_alloc: Matrix, green_rate: Matrix, brown_alloc: Matrix, brown_rate: Matrix):
        self.green_alloc = np.asarray(green_alloc, dtype=np.float64)
        self.green_rate = np.asarray(green_rate, dtype=np.float64)
        self.brown_alloc = np.asarray(brown_alloc, dtype=np.float64)
        self.brown_rate = np.asarray(brown_rate, dtype=np.float64)

        assert len(self.green_alloc.shape) == 2, f'expected [nb_dcs, nb_classes] arrays, got={self.green_alloc.shape}'
        for name in ('green_rate', 'brown_alloc', 'brown_rate'):
            value = getattr(self, name)
            assert value.shape == self.green_alloc.shape, f'`{name}` shape={value.shape} differs ' \
                                                          f'from green_alloc shape={self.green_alloc.shape}'

    @staticmethod
    def zeros(nb_dcs: int, nb_classes: int) -> 'Allocation':
        z = np.zeros([nb_dcs, nb_classes])
        return Allocation(z.copy(), z.copy(), z.copy(), z.copy())

    @property
    def nb_dcs(self) -> int:
        return self.green_alloc.shape[0]

    @property
    def nb_classes(self) -> int:
        return self.green_alloc.shape[1]

    def alloc(self, supply: int) -> Matrix:
        return self.green_alloc if supply == GREEN else self.brown_alloc

    def rate(self, supply: int) -> Matrix:
        return self.green_rate if supply == GREEN else self.brown_rate

    def class_totals(self) -> Vector:
        """
        Returns:
            the request rate allotted to each class, summed over data centers and supplies
        """
        return (self.green_alloc + self.brown_alloc).sum(axis=0)

    def copy(self) -> 'Allocation':
        return Allocation(self.green_alloc.copy(), self.green_rate.copy(),
                          self.brown_alloc.copy(), self.brown_rate.copy())

    def to_vector(self) -> Vector:
        lambdas = np.concatenate([self.green_alloc.ravel(), self.brown_alloc.ravel()])
        mus = np.concatenate([self.green_rate.ravel(), self.brown_rate.ravel()])
        x = np.empty(2 * len(lambdas))
        x[0::2] = lambdas
        x[1::2] = mus
        return x

    @staticmethod
    def from_vector(x: Vector, nb_dcs: int, nb_classes: int) -> 'Allocation':
        x = np.asarray(x, dtype=np.float64)
        nb_queues = 2 * nb_dcs * nb_classes
        assert len(x) == 2 * nb_queues, f'expected {2 * nb_queues} variables, got={len(x)}'
        shape = [nb_dcs, nb_classes]
        lambdas = x[0::2]
        mus = x[1::2]
        half = nb_dcs * nb_classes
        return Allocation(
            lambdas[:half].reshape(shape),
            mus[:half].reshape(shape),
            lambdas[half:].reshape(shape),
            mus[half:].reshape(shape))

    def __repr__(self):
        return f'Allocation(nb_dcs={self.nb_dcs}, nb_classes={self.nb_classes}, ' \
               f'class_totals={self.class_totals().tolist()})'
