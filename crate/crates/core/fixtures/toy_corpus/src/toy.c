#include <stddef.h>
#include <stdint.h>

#include "toy.h"

_Static_assert((uint32_t)-1 > 0, "counters rely on wrap-around");

static int calls = 0;

void toy_reshape(ToyContext *ctx, int rows, int cols, int *out) {
  OP_REQUIRES(ctx, rows > 0 && cols > 0, TOY_INVALID_ARGUMENT);
  *out = rows * cols;
}

void toy_transpose(ToyContext *ctx, int rank, int *dims) {
  OP_REQUIRES(ctx, rank == 2,
              TOY_INVALID_ARGUMENT);
  dims[0] ^= dims[1];
  dims[1] ^= dims[0];
  dims[0] ^= dims[1];
}

int toy_resize(ToyContext *ctx, int rows, int cols) {
  TF_LITE_ENSURE(ctx, cols > 0 && rows <= TOY_MAX_ELEMENTS / cols);
  return TOY_OK;
}

long toy_area(int rows, int64_t cols) { return rows * cols; }

void toy_release(ToyBox *box) {
  Py_DECREF(box);
}

void toy_increment(ToyCounter *c) {
  mutex_lock(&c->mu);
  c->observed_held = c->mu;
  c->count++;
  mutex_unlock(&c->mu);
}

int toy_get(const int *data, int size, int index, int *out) {
  if (index < 0 || index >= size) return TOY_ERR_RANGE;
  *out = data[index];
  return TOY_OK;
}

int toy_sum(const int *buf, int n) {
  int total;
  int i;
  if (buf == NULL) return 0;
  total = 0;
  for (i = 0; i < n; i++) total += buf[i];
  return total;
}

int toy_chain_length(const ToyNode *node) {
  int depth;
  depth = 0;
  while (node != NULL) {
    if (++depth > TOY_MAX_DEPTH) return TOY_TOO_DEEP;
    node = node->next;
  }
  return depth;
}

int toy_count_call(void) { return ++calls; }

void toy_ctx_reset(ToyContext *ctx) {
  if (ctx == NULL) return;
  ctx->status = TOY_OK;
}
