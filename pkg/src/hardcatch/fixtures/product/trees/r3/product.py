"""Toy product record with supplier locations."""


class Product:
    def __init__(self, name):
        self.name = name
        self.supplier_locs = []

    def get_supplier_locs(self):
        return self.supplier_locs

    def distance(self):
        return [Locations.latitude(loc) - HOME_LATITUDE for loc in self.supplier_locs]


HOME_LATITUDE = 53.4


class Locations:
    LONDON = "LONDON"
    _LATITUDES = {"LONDON": 51.5}

    @classmethod
    def latitude(cls, loc):
        return cls._LATITUDES[loc]


def MOCK_PRODUCT(*locs):
    product = Product("mock")
    product.supplier_locs = list(locs)
    return product

