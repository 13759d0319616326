#include <cstdio>
#include <vector>

#include "framework.h"

namespace tensorflow {
void RunBroadcastTo(OpKernelContext* ctx);
}

using tensorflow::OpKernelContext;
using tensorflow::TensorShape;

static int failures = 0;

static void Expect(const char* name, bool ok) {
  std::printf("%s: %s\n", ok ? "ok" : "FAIL", name);
  if (!ok) ++failures;
}

static void BroadcastsRow() {
  OpKernelContext ctx(TensorShape({3}), {1, 2, 3}, TensorShape({2, 3}));
  tensorflow::RunBroadcastTo(&ctx);
  Expect("BroadcastsRow", ctx.status().empty() &&
                              ctx.output() == std::vector<float>({1, 2, 3, 1, 2, 3}));
}

static void BroadcastsColumn() {
  OpKernelContext ctx(TensorShape({2, 1}), {4, 5}, TensorShape({2, 2}));
  tensorflow::RunBroadcastTo(&ctx);
  Expect("BroadcastsColumn", ctx.status().empty() &&
                                 ctx.output() == std::vector<float>({4, 4, 5, 5}));
}

static void BroadcastsScalar() {
  OpKernelContext ctx(TensorShape(), {7}, TensorShape({3}));
  tensorflow::RunBroadcastTo(&ctx);
  Expect("BroadcastsScalar", ctx.output() == std::vector<float>({7, 7, 7}));
}

static void EmptyOutput() {
  OpKernelContext ctx(TensorShape({0}), {}, TensorShape({2, 0}));
  tensorflow::RunBroadcastTo(&ctx);
  Expect("EmptyOutput", ctx.output().empty());
}

int main() {
  BroadcastsRow();
  BroadcastsColumn();
  BroadcastsScalar();
  EmptyOutput();
  return failures == 0 ? 0 : 1;
}
