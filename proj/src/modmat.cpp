#include "irislab/modmat.hpp"

#include <cmath>
#include <fstream>

namespace irislab::modmat {

std::vector<uint32_t> primes_in_range(uint32_t lo, uint32_t hi) {
    std::vector<uint32_t> out;
    for (uint32_t n = std::max(lo, 2u); n <= hi; ++n) {
        bool prime = n >= 2;
        for (uint32_t q = 2; q * q <= n; ++q) {
            if (n % q == 0) {
                prime = false;
                break;
            }
        }
        if (prime) out.push_back(n);
    }
    return out;
}

std::size_t RnsBasis::digit_planes() const {
    std::size_t planes = 0;
    for (const auto& m : moduli) planes += m.e;
    return planes;
}

double RnsBasis::log2_Q() const {
    // Exact bit length minus fractional part via mpf for a sharp value.
    mpf_class f(Q, 512);
    long exp = 0;
    const double mant = mpf_get_d_2exp(&exp, f.get_mpf_t());
    return std::log2(mant) + static_cast<double>(exp);
}

RnsBasis build_paper_basis() {
    RnsBasis b;
    b.Q = 1;
    for (uint32_t p : primes_in_range(127, 253)) {
        b.moduli.push_back({p, 2});
        b.Q *= mpz_class(p) * p;
    }
    return b;
}

double max_int8_rns_capacity() {
    double log2_total = 0.0;
    for (uint32_t p : primes_in_range(3, 253)) {
        uint32_t e = 0;
        uint64_t pw = 1;
        while (pw * p < 256) {
            pw *= p;
            ++e;
        }
        log2_total += e * std::log2(static_cast<double>(p));
    }
    return log2_total;
}

std::size_t pure_rns_plane_count() {
    return primes_in_range(3, 253).size();
}

BigMatrix BigMatrix::zeros(std::size_t r, std::size_t c) {
    BigMatrix m;
    m.rows = r;
    m.cols = c;
    m.a.assign(r * c, mpz_class(0));
    return m;
}

BigMatrix BigMatrix::identity(std::size_t n) {
    BigMatrix m = zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1;
    return m;
}

void BigMatrix::reduce(const mpz_class& Q) {
    for (auto& x : a) {
        x %= Q;
        if (x < 0) x += Q;
    }
}

DigitMatrices digit_decompose(const SmallMatrix& m, uint32_t p) {
    if (p >= 256) throw ModulusTooLarge("digit base must be < 2^8");
    const int32_t psq = static_cast<int32_t>(p * p);
    const int32_t half = static_cast<int32_t>((p - 1) / 2);
    DigitMatrices d;
    d.p = p;
    d.m0 = {m.rows, m.cols, std::vector<int32_t>(m.a.size())};
    d.m1 = {m.rows, m.cols, std::vector<int32_t>(m.a.size())};
    for (std::size_t i = 0; i < m.a.size(); ++i) {
        int32_t v = m.a[i] % psq;
        if (v < 0) v += psq;
        int32_t d0 = v % static_cast<int32_t>(p);
        if (d0 > half) d0 -= static_cast<int32_t>(p);
        int32_t d1 = ((v - d0) / static_cast<int32_t>(p)) % static_cast<int32_t>(p);
        if (d1 > half) d1 -= static_cast<int32_t>(p);
        // (d0 + p*d1) == v mod p^2 with both digits centered.
        d.m0.a[i] = d0;
        d.m1.a[i] = d1;
    }
    return d;
}

SmallMatrix digit_recompose(const DigitMatrices& d) {
    const int32_t p = static_cast<int32_t>(d.p);
    const int32_t psq = p * p;
    SmallMatrix m{d.m0.rows, d.m0.cols, std::vector<int32_t>(d.m0.a.size())};
    for (std::size_t i = 0; i < m.a.size(); ++i) {
        int32_t v = (d.m0.a[i] + p * d.m1.a[i]) % psq;
        if (v < 0) v += psq;
        m.a[i] = v;
    }
    return m;
}

SmallMatrix small_gemm(const SmallMatrix& a, const SmallMatrix& b) {
    if (a.cols != b.rows) throw ShapeMismatch("small_gemm: inner dimensions differ");
    int64_t max_a = 0, max_b = 0;
    for (int32_t v : a.a) max_a = std::max<int64_t>(max_a, std::abs(v));
    for (int32_t v : b.a) max_b = std::max<int64_t>(max_b, std::abs(v));
    const int64_t bound = static_cast<int64_t>(a.cols) * max_a * max_b;
    if (bound >= (int64_t{1} << 31)) {
        throw AccumulationOverflowRisk("int32 accumulation bound exceeded: K*|A|*|B| = " +
                                       std::to_string(bound));
    }
    SmallMatrix c{a.rows, b.cols, std::vector<int32_t>(a.rows * b.cols, 0)};
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            const int32_t aik = a.at(i, k);
            if (aik == 0) continue;
            const int32_t* brow = &b.a[k * b.cols];
            int32_t* crow = &c.a[i * c.cols];
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

SmallMatrix gemm_mod_psq(const SmallMatrix& a, const SmallMatrix& b, uint32_t p) {
    const auto da = digit_decompose(a, p);
    const auto db = digit_decompose(b, p);
    // (A0 + pA1)(B0 + pB1) = A0B0 + p(A0B1 + A1B0) mod p^2.
    const SmallMatrix t00 = small_gemm(da.m0, db.m0);
    const SmallMatrix t01 = small_gemm(da.m0, db.m1);
    const SmallMatrix t10 = small_gemm(da.m1, db.m0);
    const int64_t psq = static_cast<int64_t>(p) * p;
    SmallMatrix c{t00.rows, t00.cols, std::vector<int32_t>(t00.a.size())};
    for (std::size_t i = 0; i < c.a.size(); ++i) {
        int64_t v = (static_cast<int64_t>(t00.a[i]) +
                     static_cast<int64_t>(p) * (static_cast<int64_t>(t01.a[i]) + t10.a[i])) %
                    psq;
        if (v < 0) v += psq;
        c.a[i] = static_cast<int32_t>(v);
    }
    return c;
}

BigMatrix gemm_mod_Q(const BigMatrix& a, const BigMatrix& b, const RnsBasis& basis) {
    if (a.cols != b.rows) throw ShapeMismatch("gemm_mod_Q: inner dimensions differ");
    BigMatrix c = BigMatrix::zeros(a.rows, b.cols);

    for (const auto& mod : basis.moduli) {
        const uint32_t m = mod.value();
        // Residue planes of the operands.
        SmallMatrix ra{a.rows, a.cols, std::vector<int32_t>(a.a.size())};
        SmallMatrix rb{b.rows, b.cols, std::vector<int32_t>(b.a.size())};
        for (std::size_t i = 0; i < a.a.size(); ++i) {
            ra.a[i] = static_cast<int32_t>(mpz_fdiv_ui(a.a[i].get_mpz_t(), m));
        }
        for (std::size_t i = 0; i < b.a.size(); ++i) {
            rb.a[i] = static_cast<int32_t>(mpz_fdiv_ui(b.a[i].get_mpz_t(), m));
        }
        const SmallMatrix rc =
            mod.e == 2 ? gemm_mod_psq(ra, rb, mod.p) : small_gemm(ra, rb);

        // CRT lift: c += (Q/m) * ((Q/m)^-1 * rc mod m).
        const mpz_class qi = basis.Q / m;
        mpz_class inv;
        if (mpz_invert(inv.get_mpz_t(), qi.get_mpz_t(), mpz_class(m).get_mpz_t()) == 0) {
            throw Error("CRT basis is not coprime");
        }
        const uint64_t inv_u = inv.get_ui();
        for (std::size_t i = 0; i < c.a.size(); ++i) {
            uint64_t r = static_cast<uint64_t>(rc.a[i]) % m;
            r = (r * inv_u) % m;
            c.a[i] += qi * static_cast<unsigned long>(r);
        }
    }
    c.reduce(basis.Q);
    return c;
}

BigMatrix oracle_gemm_mod_Q(const BigMatrix& a, const BigMatrix& b, const mpz_class& Q) {
    if (a.cols != b.rows) throw ShapeMismatch("oracle_gemm_mod_Q: inner dimensions differ");
    BigMatrix c = BigMatrix::zeros(a.rows, b.cols);
    mpz_class acc, t;
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < b.cols; ++j) {
            acc = 0;
            for (std::size_t k = 0; k < a.cols; ++k) {
                t = a.at(i, k) * b.at(k, j);
                acc += t;
            }
            mpz_mod(c.at(i, j).get_mpz_t(), acc.get_mpz_t(), Q.get_mpz_t());
        }
    }
    return c;
}

// --- serialization -------------------------------------------------------

void save_big_matrix(const std::string& path, const BigMatrix& m, const mpz_class& Q) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path + " for writing");
    const std::size_t width = (mpz_sizeinbase(Q.get_mpz_t(), 2) + 7) / 8;
    os << m.rows << " " << m.cols << " " << Q.get_str() << "\n";
    std::vector<uint8_t> buf(width);
    for (const auto& x : m.a) {
        std::fill(buf.begin(), buf.end(), 0);
        std::size_t count = 0;
        // order=-1, endian=-1: least significant word/byte first.
        mpz_export(buf.data(), &count, -1, 1, -1, 0, x.get_mpz_t());
        os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(width));
    }
}

BigMatrix load_big_matrix(const std::string& path, mpz_class* Q_out) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path);
    std::size_t rows = 0, cols = 0;
    std::string q_str;
    is >> rows >> cols >> q_str;
    is.get();  // newline
    mpz_class Q(q_str);
    if (Q_out) *Q_out = Q;
    const std::size_t width = (mpz_sizeinbase(Q.get_mpz_t(), 2) + 7) / 8;
    BigMatrix m = BigMatrix::zeros(rows, cols);
    std::vector<uint8_t> buf(width);
    for (auto& x : m.a) {
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(width));
        if (!is) throw Error("truncated matrix file " + path);
        mpz_import(x.get_mpz_t(), width, -1, 1, -1, 0, buf.data());
    }
    return m;
}

}  // namespace irislab::modmat
