#include "lomo/core/kernels.hpp"

namespace lomo::kern {

const Ops& scalar_ops() {
  static const Ops table = {
      &ref::gemm_nn<float>, &ref::gemm_nt<float>, &ref::add<float>,
      &ref::sub<float>,     &ref::mul<float>,     &ref::axpy<float>,
      &ref::scal<float>,    &ref::sum<float>,     &ref::dot<float>,
      &ref::sumsq<float>,   &ref::vexp<float>,    &ref::silu<float>,
      &ref::silu_bwd<float>, &ref::softmax_rows<float>, &ref::adam<float>,
  };
  return table;
}

}  // namespace lomo::kern
