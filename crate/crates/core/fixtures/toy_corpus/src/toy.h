#ifndef TOY_H
#define TOY_H

#define TOY_OK 0
#define TOY_INVALID_ARGUMENT 1
#define TOY_ERR_RANGE 2
#define TOY_TOO_DEEP (-1)
#define TOY_MAX_ELEMENTS 1024
#define TOY_MAX_DEPTH 64

typedef struct {
  int status;
} ToyContext;

typedef struct {
  int refcnt;
  int value;
} ToyBox;

typedef struct {
  int mu;
  int observed_held;
  int count;
} ToyCounter;

typedef struct ToyNode {
  struct ToyNode *next;
} ToyNode;

/* Stand-ins for the checker and runtime macros of real ML kernels. */
#define OP_REQUIRES(ctx, cond, code) \
  do {                               \
    if (!(cond)) {                   \
      (ctx)->status = (code);        \
      return;                        \
    }                                \
  } while (0)

#define TF_LITE_ENSURE(ctx, cond)              \
  do {                                         \
    if (!(cond)) {                             \
      (ctx)->status = TOY_INVALID_ARGUMENT;    \
      return TOY_INVALID_ARGUMENT;             \
    }                                          \
  } while (0)

#define Py_DECREF(o) ((o)->refcnt--)
#define mutex_lock(mu) (*(mu) = 1)
#define mutex_unlock(mu) (*(mu) = 0)

void toy_reshape(ToyContext *ctx, int rows, int cols, int *out);
void toy_transpose(ToyContext *ctx, int rank, int *dims);
int toy_resize(ToyContext *ctx, int rows, int cols);
void toy_release(ToyBox *box);
void toy_increment(ToyCounter *c);
int toy_get(const int *data, int size, int index, int *out);
int toy_sum(const int *buf, int n);
int toy_chain_length(const ToyNode *node);
int toy_count_call(void);
void toy_ctx_reset(ToyContext *ctx);

#endif
