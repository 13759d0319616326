// BroadcastTo kernel, reduced to the parts needed to reproduce a mutation
// testing result: the input/output shape checker below is never exercised
// with incompatible shapes by the accompanying tests.

#include <vector>

#include "framework.h"

namespace tensorflow {

namespace {

// Shapes are aligned on their trailing dimensions; every input dimension
// must either be 1 or equal the corresponding output dimension.
bool BroadcastCompatible(const TensorShape& in, const TensorShape& out) {
  const auto offset = out.dims() - in.dims();
  auto ok = offset >= 0;
  for (auto d = 0; ok && d < in.dims(); ++d) {
    ok = in.dim_size(d) == 1 || in.dim_size(d) == out.dim_size(d + offset);
  }
  return ok;
}

// Index into `in` of the element that lands at flat position `flat` of `out`.
int SourceIndex(const TensorShape& in, const TensorShape& out, int flat) {
  const auto offset = out.dims() - in.dims();
  auto src = 0;
  auto stride = 1;
  for (auto d = out.dims() - 1; d >= 0; --d) {
    const auto coord = flat % out.dim_size(d);
    flat /= out.dim_size(d);
    const auto in_dim = d - offset;
    if (in_dim < 0) continue;
    if (in.dim_size(in_dim) != 1) src += coord * stride;
    stride *= in.dim_size(in_dim);
  }
  return src;
}

std::vector<float> BroadcastValues(const std::vector<float>& values,
                                   const TensorShape& in,
                                   const TensorShape& out) {
  std::vector<float> result(out.num_elements());
  for (auto i = 0; i < out.num_elements(); ++i) {
    result[i] = values[SourceIndex(in, out, i)];
  }
  return result;
}

}  // namespace

// Broadcasts its input to the requested shape.
//
// Inputs: a tensor and the target shape. The output has the target shape
// and repeats input elements along every dimension where the input has
// size 1 or is missing.
// Shape checks happen in Compute since the target shape is a runtime value.
class BroadcastToOp {
 public:
  explicit BroadcastToOp(const char* name) : name_(name) {}

  void Compute(OpKernelContext* ctx);

  const char* name() const { return name_; }

 private:
  const char* name_;
};

void BroadcastToOp::Compute(OpKernelContext* ctx) {
  const TensorShape& input_shape = ctx->input_shape();
  const TensorShape& output_shape = ctx->requested_shape();

  if (input_shape.num_elements() == 0 || output_shape.num_elements() == 0) {
    ctx->set_output({});
    return;
  }

  // Shapes that cannot be broadcast are rejected before any output is
  // allocated.
  OP_REQUIRES(ctx, BroadcastCompatible(input_shape, output_shape),
              errors::InvalidArgument("Unable to broadcast tensor of shape ",
                                      input_shape.DebugString(), " to tensor of shape ",
                                      output_shape.DebugString()));

  ctx->set_output(
      BroadcastValues(ctx->input(), input_shape, output_shape));
}

void RunBroadcastTo(OpKernelContext* ctx) {
  BroadcastToOp op("BroadcastTo");
  op.Compute(ctx);
}

}  // namespace tensorflow
