#ifndef DIVREC_H
#define DIVREC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DivrecStatus {
  DIVREC_STATUS_OK = 0,
  DIVREC_STATUS_NULL_POINTER = 1,
  DIVREC_STATUS_INVALID_ARGUMENT = 2,
  DIVREC_STATUS_IO = 3,
  DIVREC_STATUS_PARSE = 4,
  DIVREC_STATUS_COMPUTATION = 5,
  DIVREC_STATUS_BUFFER_TOO_SMALL = 6,
  // The quantity is not defined for these inputs (no neighbours, constant vector).
  DIVREC_STATUS_UNDEFINED = 7,
  DIVREC_STATUS_PANIC = 8,
} DivrecStatus;

typedef enum DivrecSplit {
  DIVREC_SPLIT_RANDOM = 0,
  DIVREC_SPLIT_LONGITUDINAL = 1,
} DivrecSplit;

typedef enum DivrecKernel {
  DIVREC_KERNEL_KENDALL = 0,
  DIVREC_KERNEL_PEARSON = 1,
} DivrecKernel;

typedef enum DivrecMetric {
  DIVREC_METRIC_VARIANCE = 0,
  DIVREC_METRIC_ENTROPY_ML = 1,
  DIVREC_METRIC_ENTROPY_DIRICHLET = 2,
  DIVREC_METRIC_ENTROPY_NSB = 3,
  DIVREC_METRIC_COMP_MAX_PROB = 4,
  DIVREC_METRIC_COMP_GINI = 5,
} DivrecMetric;

typedef enum DivrecLevel {
  DIVREC_LEVEL_USER = 0,
  DIVREC_LEVEL_PAGEVIEW = 1,
} DivrecLevel;

typedef enum DivrecAlgorithm {
  DIVREC_ALGORITHM_CF = 0,
  DIVREC_ALGORITHM_CFD = 1,
  DIVREC_ALGORITHM_POPULARITY = 2,
  DIVREC_ALGORITHM_ACTUAL = 3,
} DivrecAlgorithm;

// A loaded, filtered panel.
typedef struct DivrecPanel DivrecPanel;

// A fitted CF / CF+D model with per-user candidate sets.
typedef struct DivrecRecommender DivrecRecommender;

// Experiment settings. Start from [`divrec_config_default`].
typedef struct DivrecConfig {
  enum DivrecSplit split;
  double train_fraction;
  uint64_t seed;
  // UTC seconds; used by the longitudinal split only.
  int64_t boundary;
  enum DivrecKernel kernel;
  uintptr_t n_neighbors;
  enum DivrecMetric metric;
  enum DivrecLevel level;
  bool restrict_to_train;
  double a;
  double psi;
  // Logistic location, read only when `has_t` is set.
  double t;
  bool has_t;
} DivrecConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *divrec_version(void);

// Message for the last failed call on this thread, or NULL.
//
// The pointer stays valid until the next failing call on the same thread.
const char *divrec_last_error(void);

// Loads traffic, survey, score and optional slant files into a panel.
//
// `slants_path` may be NULL.
enum DivrecStatus divrec_panel_load(const char *const *traffic_paths,
                                    uintptr_t n_traffic,
                                    const char *survey_path,
                                    const char *scores_path,
                                    const char *slants_path,
                                    uintptr_t min_visitors,
                                    struct DivrecPanel **out);

// Restores a panel from the JSON written by `divrec ingest`.
enum DivrecStatus divrec_panel_from_json(const char *json, struct DivrecPanel **out);

void divrec_panel_free(struct DivrecPanel *panel);

// Number of users; 0 for NULL.
uintptr_t divrec_panel_n_users(const struct DivrecPanel *panel);

// Number of domains; 0 for NULL.
uintptr_t divrec_panel_n_domains(const struct DivrecPanel *panel);

// Index of a domain name (normalized the same way as on load).
enum DivrecStatus divrec_panel_domain_index(const struct DivrecPanel *panel,
                                            const char *domain,
                                            uint32_t *out);

struct DivrecConfig divrec_config_default(void);

// Splits the panel, builds the similarity table and candidate sets.
//
// The panel may be freed afterwards.
enum DivrecStatus divrec_recommender_new(const struct DivrecPanel *panel,
                                         const struct DivrecConfig *config,
                                         struct DivrecRecommender **out);

void divrec_recommender_free(struct DivrecRecommender *rec);

// CF rating prediction. `DIVREC_STATUS_UNDEFINED` when the user has no
// training ratings or no neighbour rated the domain.
enum DivrecStatus divrec_recommender_predict_cf(const struct DivrecRecommender *rec,
                                                uint32_t user,
                                                uint32_t domain,
                                                double *out);

// CF prediction plus the logistic diversity term of the domain.
enum DivrecStatus divrec_recommender_predict_cfd(const struct DivrecRecommender *rec,
                                                 uint32_t user,
                                                 uint32_t domain,
                                                 double *out);

// Logistic location in use (configured, or the mean diversity).
enum DivrecStatus divrec_recommender_location(const struct DivrecRecommender *rec, double *out);

// Ranked candidate list of `user` under `algorithm`.
//
// Writes up to `capacity` domain indices to `domains` and, when not NULL,
// their ranking scores to `scores`. `len` always receives the full list
// length; `DIVREC_STATUS_BUFFER_TOO_SMALL` is returned if it exceeds
// `capacity`. Users without candidates get an empty list.
enum DivrecStatus divrec_recommender_rank(const struct DivrecRecommender *rec,
                                          uint32_t user,
                                          enum DivrecAlgorithm algorithm,
                                          uint32_t *domains,
                                          double *scores,
                                          uintptr_t capacity,
                                          uintptr_t *len);

// Diversity of a 7-bin partisanship histogram (`counts[j]` for `j = 1..7`).
enum DivrecStatus divrec_diversity(const double *counts, enum DivrecMetric metric, double *out);

// Similarity `(1 + coefficient) / 2` of two equal-length vectors.
enum DivrecStatus divrec_similarity(enum DivrecKernel kernel,
                                    const double *x,
                                    const double *y,
                                    uintptr_t n,
                                    double *out);

// Logistic re-ranking term `a / (1 + exp(-(delta - t) / psi))`.
enum DivrecStatus divrec_logistic(double a, double psi, double t, double delta, double *out);

// Rank discount `P(r) ∝ r^-alpha` for `r = 1..k`, written to `out[0..k]`.
enum DivrecStatus divrec_discount(uintptr_t k, double alpha, double *out);

// Rank-discounted trust difference between two lists given as the trust
// scores of their entries in rank order. Uses the first
// `min(n_rec, n_base)` ranks.
enum DivrecStatus divrec_delta_q(const double *rec_scores,
                                 uintptr_t n_rec,
                                 const double *base_scores,
                                 uintptr_t n_base,
                                 double alpha,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIVREC_H */
