"""Toy product record with supplier locations."""


class Product:
    def __init__(self, name):
        self.name = name
        self.supplier_locs = []

    def get_supplier_locs(self):
        return self.supplier_locs

