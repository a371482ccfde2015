#include "irislab/costmodel.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace irislab::cost {

long long db_size_bits(int ell, long long log_q) {
    if (ell < 0 || log_q <= 0) throw ConfigError("db_size_bits: bad parameters");
    return 3LL * (ell + 1) * (1LL << 27) * log_q;
}

long long db_size_bytes_int8(int ell, int planes) {
    if (ell < 0 || planes <= 0) throw ConfigError("db_size_bytes_int8: bad parameters");
    return static_cast<long long>(planes) * 3 * (ell + 1) * (1LL << 27);
}

long long a_part_bytes_int8(int planes) {
    // The a-part is one of the two ring elements: half of the ell=1 layout.
    return db_size_bytes_int8(1, planes) / 2;
}

long long query_size_bytes(int log_n, long long q_bits, int cts_per_query) {
    if (log_n < 0 || q_bits <= 0 || cts_per_query <= 0) {
        throw ConfigError("query_size_bytes: bad parameters");
    }
    // Each ciphertext is an (a, b) pair of ring elements.
    return cts_per_query * 2LL * (1LL << log_n) * q_bits / 8;
}

long long packed_query_ct_count(int rho, int beta, int batch, long d, int log_n) {
    if (rho < 1 || beta < 1 || batch < 1 || d < 1) {
        throw ConfigError("packed_query_ct_count: bad parameters");
    }
    // batch * rho * d bit positions, beta bits per packed value, 2^log_n
    // values per ciphertext.
    const long long values = static_cast<long long>(batch) * rho * d;
    const long long per_ct = static_cast<long long>(beta) * (1LL << log_n);
    return (values + per_ct - 1) / per_ct;
}

double expansion_factor(double delta, double beta) {
    if (delta <= 0 || beta <= 0) throw ConfigError("expansion_factor: bad parameters");
    return (delta + beta) / (delta * beta);
}

CommReport comm_report(const CommParams& p) {
    CommReport r;
    r.query_bytes = query_size_bytes(p.query_log_n, p.query_q_bits, p.query_cts);
    r.result_ct_bytes = 2LL * (1LL << p.result_log_n) * p.result_q_bits / 8;
    r.share_bytes = r.result_ct_bytes / 2;  // one ring element
    r.truncated_bytes = static_cast<long long>(p.decryptors + 1) * p.subring_dim *
                        p.truncated_bits / 8;
    return r;
}

GpuPlan gpu_distribution_plan(long n_db, long n_per_slice, int slices, int planes) {
    if (n_db < 1 || n_per_slice < 1 || slices < 2) {
        throw ConfigError("gpu_distribution_plan: bad parameters");
    }
    GpuPlan plan;
    plan.slices = slices;
    plan.entries_per_slice = n_per_slice;
    plan.a_slice_bytes = a_part_bytes_int8(planes);
    // B-part of the ell=1 layout split evenly over the B-slices.
    plan.b_slice_bytes =
        (db_size_bytes_int8(1, planes) - plan.a_slice_bytes) / (slices - 1);
    const long per_cluster = static_cast<long>(slices - 1) * n_per_slice;
    plan.clusters = (n_db + per_cluster - 1) / per_cluster;
    return plan;
}

void save_cost_report_json(const std::string& path, int ell, int planes,
                           const CommParams& comm) {
    const CommReport r = comm_report(comm);
    nlohmann::json j;
    j["db_size_bytes"] = db_size_bytes_int8(ell, planes);
    j["db_size_gib"] = static_cast<double>(db_size_bytes_int8(ell, planes)) / GiB;
    j["a_part_bytes"] = a_part_bytes_int8(planes);
    j["query_bytes"] = r.query_bytes;
    j["result_ct_bytes"] = r.result_ct_bytes;
    j["share_bytes"] = r.share_bytes;
    j["truncated_receiver_bytes"] = r.truncated_bytes;
    j["expansion_factor_d16_b4"] = expansion_factor(16, 4);
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path);
    os << j.dump(2) << "\n";
}

std::string cost_report_table(int ell, int planes, const CommParams& comm) {
    const CommReport r = comm_report(comm);
    std::ostringstream os;
    os << "database (ell=" << ell << ", " << planes
       << " planes): " << db_size_bytes_int8(ell, planes) / GiB << " GiB\n"
       << "a-part: " << a_part_bytes_int8(planes) / GiB << " GiB\n"
       << "query: " << r.query_bytes / KiB << " KiB\n"
       << "decryptor ciphertext: " << r.result_ct_bytes / KiB << " KiB\n"
       << "decryption share: " << r.share_bytes / KiB << " KiB\n"
       << "receiver traffic: " << r.truncated_bytes << " B\n";
    return os.str();
}

}  // namespace irislab::cost
