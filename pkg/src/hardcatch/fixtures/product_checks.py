"""Checks for the product fixture."""

REQUIRES = {
    "weak": ["product:Product.get_supplier_locs"],
    "strong": ["product:Product.get_supplier_locs"],
    "distance": ["product:Product.distance", "product:Locations.LONDON", "product:MOCK_PRODUCT"],
}


def weak():
    from product import Product

    product = Product("widget")
    locs = product.get_supplier_locs()
    assert not locs


def strong():
    from product import Product

    product = Product("widget")
    locs = product.get_supplier_locs()
    assert locs is not None and len(locs) == 0


def distance():
    from product import MOCK_PRODUCT, Locations

    test_supplier = MOCK_PRODUCT(Locations.LONDON)
    dist = test_supplier.distance()
    assert all(d >= 0 for d in dist), dist
