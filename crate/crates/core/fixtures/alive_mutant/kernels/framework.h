// Minimal stand-ins for the kernel framework types used by the broadcast op.
#ifndef MOCK_FRAMEWORK_H_
#define MOCK_FRAMEWORK_H_

#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace tensorflow {

class TensorShape {
 public:
  TensorShape() {}
  explicit TensorShape(std::vector<int> dims) : dims_(std::move(dims)) {}

  int dims() const { return static_cast<int>(dims_.size()); }
  int dim_size(int d) const { return dims_[d]; }

  int num_elements() const {
    auto n = 1;
    for (auto d : dims_) n *= d;
    return n;
  }

  std::string DebugString() const {
    std::ostringstream out;
    out << "[";
    for (auto i = 0; i < dims(); ++i) out << (i ? "," : "") << dims_[i];
    out << "]";
    return out.str();
  }

 private:
  std::vector<int> dims_;
};

namespace errors {
template <typename... Args>
std::string InvalidArgument(const Args&... args) {
  std::ostringstream out;
  (out << ... << args);
  return out.str();
}
}  // namespace errors

class OpKernelContext {
 public:
  OpKernelContext(TensorShape input_shape, std::vector<float> input,
                  TensorShape requested)
      : input_shape_(std::move(input_shape)),
        input_(std::move(input)),
        requested_(std::move(requested)) {}

  const TensorShape& input_shape() const { return input_shape_; }
  const std::vector<float>& input() const { return input_; }
  const TensorShape& requested_shape() const { return requested_; }

  void SetStatus(std::string message) { status_ = std::move(message); }
  const std::string& status() const { return status_; }

  void set_output(std::vector<float> values) { output_ = std::move(values); }
  const std::vector<float>& output() const { return output_; }

 private:
  TensorShape input_shape_;
  std::vector<float> input_;
  TensorShape requested_;
  std::string status_;
  std::vector<float> output_;
};

#define OP_REQUIRES(CTX, EXP, STATUS) \
  do {                                \
    if (!(EXP)) {                     \
      (CTX)->SetStatus(STATUS);       \
      return;                         \
    }                                 \
  } while (0)

}  // namespace tensorflow

#endif  // MOCK_FRAMEWORK_H_
