#pragma once

#include <cmath>
#include <stdexcept>

// Small fixed-size linear algebra used throughout: tangent vectors on the
// annulus (rho, phi), vectors in 3-space, symmetric bilinear forms on the
// annulus, 3x2 tangent maps and orthonormal moving frames.

namespace corrhyp {

struct Vec2 {
    double rho = 0.0;
    double phi = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.rho + b.rho, a.phi + b.phi}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.rho - b.rho, a.phi - b.phi}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.rho, s * v.phi}; }
inline double det(Vec2 a, Vec2 b) { return a.rho * b.phi - a.phi * b.rho; }

// Covector on the annulus; pairs with Vec2 through apply().
struct Covec2 {
    double c_rho = 0.0;
    double c_phi = 0.0;

    double apply(Vec2 v) const { return c_rho * v.rho + c_phi * v.phi; }
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, Vec3 v) { return {s * v.x, s * v.y, s * v.z}; }
inline Vec3& operator+=(Vec3& a, Vec3 b) { a.x += b.x; a.y += b.y; a.z += b.z; return a; }

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalized(Vec3 v) {
    const double n = norm(v);
    if (!(n > 0.0)) throw std::domain_error("normalized: zero vector");
    return (1.0 / n) * v;
}

// Symmetric bilinear form E drho^2 + 2 F drho dphi + G dphi^2.
struct SymForm2 {
    double E = 0.0;
    double F = 0.0;
    double G = 0.0;

    double apply(Vec2 u, Vec2 v) const {
        return E * u.rho * v.rho + F * (u.rho * v.phi + u.phi * v.rho) + G * u.phi * v.phi;
    }
    double quad(Vec2 v) const { return apply(v, v); }
};

inline SymForm2 operator+(SymForm2 a, SymForm2 b) { return {a.E + b.E, a.F + b.F, a.G + b.G}; }
inline SymForm2 operator-(SymForm2 a, SymForm2 b) { return {a.E - b.E, a.F - b.F, a.G - b.G}; }
inline SymForm2 operator*(double s, SymForm2 b) { return {s * b.E, s * b.F, s * b.G}; }

// Rank-one square ell (x) ell of a covector.
inline SymForm2 outer_square(Covec2 l) {
    return {l.c_rho * l.c_rho, l.c_rho * l.c_phi, l.c_phi * l.c_phi};
}

inline void eigenvalues(SymForm2 b, double& lo, double& hi) {
    const double tr = b.E + b.G;
    const double d = std::hypot(b.E - b.G, 2.0 * b.F);
    lo = 0.5 * (tr - d);
    hi = 0.5 * (tr + d);
}

// Spectral norm: largest absolute eigenvalue of [[E,F],[F,G]].
inline double form_norm(SymForm2 b) {
    double lo, hi;
    eigenvalues(b, lo, hi);
    return std::max(std::fabs(lo), std::fabs(hi));
}

inline double min_eigenvalue(SymForm2 b) {
    double lo, hi;
    eigenvalues(b, lo, hi);
    return lo;
}

// Tangent map: columns are the images of d/drho and d/dphi.
struct LinMap23 {
    Vec3 d_rho;
    Vec3 d_phi;

    Vec3 apply(Vec2 v) const { return v.rho * d_rho + v.phi * d_phi; }
};

inline LinMap23 operator-(LinMap23 a, LinMap23 b) {
    return {a.d_rho - b.d_rho, a.d_phi - b.d_phi};
}

inline SymForm2 pullback(LinMap23 m) {
    return {dot(m.d_rho, m.d_rho), dot(m.d_rho, m.d_phi), dot(m.d_phi, m.d_phi)};
}

inline void singular_values(LinMap23 m, double& lo, double& hi) {
    double elo, ehi;
    eigenvalues(pullback(m), elo, ehi);
    lo = std::sqrt(std::max(elo, 0.0));
    hi = std::sqrt(std::max(ehi, 0.0));
}

// Largest singular value.
inline double op_norm(LinMap23 m) {
    double lo, hi;
    singular_values(m, lo, hi);
    return hi;
}

// Smallest singular value; the immersion margin of a tangent map.
inline double lambda_min(LinMap23 m) {
    double lo, hi;
    singular_values(m, lo, hi);
    return lo;
}

// Orthonormal direct frame (t, w, n).
struct Frame3 {
    Vec3 t;
    Vec3 w;
    Vec3 n;
};

// 3x3 matrix, row-major.
struct Mat3 {
    double m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};

    static Mat3 identity() {
        Mat3 r;
        r.m[0][0] = r.m[1][1] = r.m[2][2] = 1.0;
        return r;
    }
    Vec3 apply(Vec3 v) const {
        return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
                m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
    }
    Vec3 column(int j) const { return {m[0][j], m[1][j], m[2][j]}; }
};

inline Mat3 operator*(const Mat3& a, const Mat3& b) {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            r.m[i][j] = a.m[i][0] * b.m[0][j] + a.m[i][1] * b.m[1][j] + a.m[i][2] * b.m[2][j];
    return r;
}

inline Mat3 frame_matrix(const Frame3& f) {
    Mat3 r;
    r.m[0][0] = f.t.x; r.m[0][1] = f.w.x; r.m[0][2] = f.n.x;
    r.m[1][0] = f.t.y; r.m[1][1] = f.w.y; r.m[1][2] = f.n.y;
    r.m[2][0] = f.t.z; r.m[2][1] = f.w.z; r.m[2][2] = f.n.z;
    return r;
}

inline Mat3 transpose(const Mat3& a) {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r.m[i][j] = a.m[j][i];
    return r;
}

inline double frobenius_distance(const Mat3& a, const Mat3& b) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const double d = a.m[i][j] - b.m[i][j];
            s += d * d;
        }
    return std::sqrt(s);
}

// Rotation by theta in the t-n coordinate plane of a frame (first and third
// axes), leaving the w axis fixed.
inline Mat3 rotation_tn(double theta) {
    Mat3 r = Mat3::identity();
    const double c = std::cos(theta), s = std::sin(theta);
    r.m[0][0] = c;  r.m[0][2] = -s;
    r.m[2][0] = s;  r.m[2][2] = c;
    return r;
}

// Rotation by beta about the n axis (third axis).
inline Mat3 rotation_about_n(double beta) {
    Mat3 r = Mat3::identity();
    const double c = std::cos(beta), s = std::sin(beta);
    r.m[0][0] = c;  r.m[0][1] = -s;
    r.m[1][0] = s;  r.m[1][1] = c;
    return r;
}

// Rotation by phi about the z axis of 3-space.
inline Mat3 rotation_z(double phi) {
    Mat3 r = Mat3::identity();
    const double c = std::cos(phi), s = std::sin(phi);
    r.m[0][0] = c;  r.m[0][1] = -s;
    r.m[1][0] = s;  r.m[1][1] = c;
    return r;
}

}  // namespace corrhyp
