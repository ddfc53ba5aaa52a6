#include "spca/linalg.hpp"

namespace spca {

template SvdResult<double> svd_thin<double>(const MatrixX<double>&, Index);
template PcaBasis<double> pca_fit_svd<double>(const MatrixX<double>&, Index);
template MatrixX<double> random_semi_orthogonal<double>(Index, Index, Rng&);

}  // namespace spca
