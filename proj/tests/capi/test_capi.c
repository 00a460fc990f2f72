/* Exercises the C interface from C: handles, status codes, last-error text. */

#include <math.h>
#include <stdio.h>
#include <string.h>

#include "bohm/bohm.h"

static int failures = 0;

#define EXPECT(cond)                                             \
  do {                                                           \
    if (!(cond)) {                                               \
      fprintf(stderr, "%s:%d: failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                \
    }                                                            \
  } while (0)

static void plane_wave(void) {
  const double k[1] = {0.75}, re[1] = {1.0}, im[1] = {0.0};
  bohm_wave* w = NULL;
  EXPECT(bohm_wave_create(1.0, 1, 1, k, re, im, 1, &w) == BOHM_OK);
  if (!w) return;

  const double omega = sqrt(1.0 + 0.75 * 0.75);
  const double x[2] = {0.4, -1.3};
  double pr = 0, pi = 0;
  EXPECT(bohm_wave_eval(w, x, &pr, &pi) == BOHM_OK);
  EXPECT(fabs(pr * pr + pi * pi - 1.0) < 1e-12);

  double j[2] = {0, 0};
  EXPECT(bohm_wave_current(w, x, j) == BOHM_OK);
  EXPECT(fabs(j[0] - 2.0 * omega) < 1e-12);

  const double x0[2] = {0.0, 0.0};
  bohm_path* p = NULL;
  EXPECT(bohm_path_integrate(w, x0, 20.0, 1e-10, &p) == BOHM_OK);
  if (p) {
    const size_t n = bohm_path_size(p);
    double tau = 0, end[2] = {0, 0};
    EXPECT(n > 1);
    EXPECT(bohm_path_point(p, n - 1, &tau, end) == BOHM_OK);
    EXPECT(end[0] > 0.0);
    EXPECT(fabs(end[1] / end[0] - 0.75 / omega) < 1e-8);
    EXPECT(bohm_path_reversal_count(p) == 0);
    size_t count = 99;
    int sign = 0;
    EXPECT(bohm_path_crossings(p, 0.5 * end[0], &sign, 1, &count) == BOHM_OK);
    EXPECT(count == 1 && sign == 1);
    EXPECT(bohm_path_crossings(p, 2.0 * end[0], &sign, 1, &count) == BOHM_ERR_INVALID);
    EXPECT(bohm_path_point(p, n, &tau, end) == BOHM_ERR_INVALID);
    bohm_path_free(p);
  }
  bohm_wave_free(w);
}

static void errors(void) {
  bohm_wave* w = (bohm_wave*)1;
  const double k[1] = {1.0}, re[1] = {1.0};
  EXPECT(bohm_wave_create(1.0, 2, 1, k, re, NULL, 0, &w) == BOHM_ERR_INVALID);
  EXPECT(w == NULL);
  EXPECT(strlen(bohm_last_error()) > 0);
  EXPECT(bohm_wave_create(1.0, 1, 1, NULL, re, NULL, 0, &w) == BOHM_ERR_INVALID);

  bohm_run* r = (bohm_run*)1;
  EXPECT(bohm_run_config("{\"kind\": ", NULL, &r) == BOHM_ERR_INVALID);
  EXPECT(r == NULL);
  EXPECT(bohm_run_config("{\"kind\": \"no-such-kind\"}", NULL, &r) == BOHM_ERR_INVALID);
  EXPECT(bohm_run_preset("no-such-preset", NULL, &r) == BOHM_ERR_INVALID);
  EXPECT(bohm_preset_config("no-such-preset") == NULL);
  EXPECT(strcmp(bohm_status_name(BOHM_ERR_NODE), "node") == 0);
}

static void lattice(void) {
  bohm_lattice* l = NULL;
  EXPECT(bohm_lattice_create(2, 3, 1.0, 0.0, 6.283185307179586, &l) == BOHM_OK);
  if (!l) return;
  const size_t n = bohm_lattice_basis_size(l);
  EXPECT(n == 16);
  double re[16] = {0}, im[16] = {0}, ro[16], io[16];
  re[0] = sqrt(0.5);
  re[5] = sqrt(0.5); /* one quantum in each mode */
  EXPECT(bohm_lattice_evolve(l, re, im, 3.7, ro, io) == BOHM_OK);
  for (size_t i = 0; i < n; ++i) EXPECT(fabs(hypot(ro[i], io[i]) - hypot(re[i], im[i])) < 1e-12);

  /* the vacuum has no one-particle component */
  double vre[16] = {0}, vim[16] = {0}, x[1] = {0.3}, wr = 1, wi = 1;
  vre[0] = 1.0;
  EXPECT(bohm_lattice_wave_function(l, vre, vim, 0.0, 1, x, &wr, &wi) == BOHM_OK);
  EXPECT(fabs(wr) < 1e-14 && fabs(wi) < 1e-14);

  EXPECT(bohm_lattice_create(0, 3, 1.0, 0.0, 6.28, &l) != BOHM_OK);
  bohm_lattice_free(l);
}

static void presets(void) {
  EXPECT(bohm_preset_count() >= 10);
  int has_fig1 = 0;
  for (size_t i = 0; i < bohm_preset_count(); ++i)
    if (strcmp(bohm_preset_name(i), "fig1") == 0) has_fig1 = 1;
  EXPECT(has_fig1);
  EXPECT(bohm_preset_name(bohm_preset_count()) == NULL);

  bohm_run* r = NULL;
  EXPECT(bohm_run_preset("fig1", NULL, &r) == BOHM_OK);
  if (!r) return;
  EXPECT(bohm_run_passed(r) == 1);
  EXPECT(bohm_run_check_count(r) >= 4);
  EXPECT(bohm_run_output_count(r) == 0);
  const char* name = NULL;
  double value = 0, lo = 0, hi = 0;
  int ok = 0;
  EXPECT(bohm_run_check(r, 0, &name, &value, &lo, &hi, &ok) == BOHM_OK);
  EXPECT(name != NULL && ok == 1);
  EXPECT(strstr(bohm_run_checks_table(r), "crossing_sum") != NULL);
  EXPECT(strlen(bohm_run_summary(r)) > 2);
  bohm_run_free(r);
}

int main(void) {
  EXPECT(strlen(bohm_version()) > 0);
  plane_wave();
  errors();
  lattice();
  presets();
  if (failures) {
    fprintf(stderr, "%d failure(s)\n", failures);
    return 1;
  }
  printf("capi: all checks passed\n");
  return 0;
}
