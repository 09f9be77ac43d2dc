from nct.quadrature.sphere import AngularQuadrature, QuadratureError, build_product_quadrature
