#include "tcran/core.hpp"

#include <cctype>
#include <sstream>

namespace tcran {

Credit::Credit(long n, long d) {
  if (d == 0) throw std::invalid_argument("credit with zero denominator");
  v_ = mpq_class(n, d);
  v_.canonicalize();
  check();
}

void Credit::check() const {
  if (sgn(v_) < 0) throw NegativeCredit("negative credit " + v_.get_str());
}

Credit Credit::parse(const std::string& s) {
  if (s.empty()) throw std::invalid_argument("empty credit");
  for (char c : s)
    if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '/'))
      throw std::invalid_argument("bad credit '" + s + "'");
  mpq_class q;
  if (q.set_str(s, 10) != 0) throw std::invalid_argument("bad credit '" + s + "'");
  if (s.find('/') != std::string::npos && q.get_den() == 0)
    throw std::invalid_argument("bad credit '" + s + "'");
  return Credit(q);
}

std::string Credit::str() const {
  return v_.get_num().get_str() + "/" + v_.get_den().get_str();
}

Credit credit_add(const Credit& a, const Credit& b) { return a + b; }

Credit credit_sub(const Credit& a, const Credit& b) {
  if (b > a) throw NegativeCredit("credit_sub: " + b.str() + " > " + a.str());
  return Credit(mpq_class(a.raw() - b.raw()));
}

std::vector<Credit> split_credit(const Credit& c, std::size_t q, SplitStrategy s) {
  if (q == 0) return {c};
  if (c.is_zero()) throw ZeroCredit("cannot split zero credit");
  std::vector<Credit> out;
  out.reserve(q + 1);
  if (s == SplitStrategy::Equal) {
    Credit share(mpq_class(c.raw() / static_cast<long>(q + 1)));
    out.assign(q + 1, share);
  } else {
    Credit half(mpq_class(c.raw() / 2));
    Credit rest(mpq_class(half.raw() / static_cast<long>(q)));
    out.push_back(half);
    out.insert(out.end(), q, rest);
  }
  return out;
}

Credit PuEntry::moved_total() const {
  Credit t;
  for (const auto& [_, c] : moved) t += c;
  return t;
}

Credit PuEntry::total() const { return resident + moved_total(); }

Credit ChiefLedger::c_pu_sum() const {
  Credit t;
  for (const auto& [_, e] : affected) t += e.total();
  return t;
}

Credit ChiefLedger::moved_sum() const {
  Credit t;
  for (const auto& [_, e] : affected) t += e.moved_total();
  return t;
}

const char* kind_name(MsgKind k) {
  static const char* names[] = {"COM", "ImPC", "ImP", "AcK", "AAcK", "TM",
                                "PaN", "NaP", "SpecialForward", "SpecialReclaim", "Refund"};
  return names[static_cast<std::size_t>(k)];
}

bool is_control(MsgKind k) { return k == MsgKind::AcK || k == MsgKind::AAcK; }

namespace {
std::string id_str(const SurrenderId& id) {
  return std::to_string(id.origin) + "#" + std::to_string(id.seq);
}
}  // namespace

std::string summarize(const Message& m) {
  std::ostringstream o;
  o << kind_name(m.kind()) << "(";
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, msg::Com>) {
          o << b.credit.str();
        } else if constexpr (std::is_same_v<T, msg::ImPC>) {
          o << b.credit.str() << "," << b.b << "," << id_str(b.id);
          if (b.handover) o << ",handover";
        } else if constexpr (std::is_same_v<T, msg::ImP>) {
          o << b.p;
        } else if constexpr (std::is_same_v<T, msg::AcK> || std::is_same_v<T, msg::AAcK>) {
          o << id_str(b.id);
        } else if constexpr (std::is_same_v<T, msg::TM>) {
          o << (b.mode == TermMode::Strong ? "strong" : "weak");
        } else if constexpr (std::is_same_v<T, msg::PaN>) {
          o << b.affected << "," << b.in_credit.str() << "," << b.out_credit.str() << ","
            << b.resident.str();
        } else if constexpr (std::is_same_v<T, msg::NaP>) {
          o << b.recovered;
        } else if constexpr (std::is_same_v<T, msg::SpecialForward>) {
          o << b.credit.str() << "," << b.origin << "," << id_str(b.id);
        } else if constexpr (std::is_same_v<T, msg::SpecialReclaim>) {
          o << b.affected;
        } else if constexpr (std::is_same_v<T, msg::Refund>) {
          o << b.credit.str() << "," << b.about;
        }
      },
      m.body);
  o << ")";
  return o.str();
}

Credit carried_credit(const Message& m) {
  switch (m.kind()) {
    case MsgKind::COM:
      return std::get<msg::Com>(m.body).credit;
    case MsgKind::ImPC: {
      const auto& b = std::get<msg::ImPC>(m.body);
      return b.ledger ? b.credit + b.ledger->moved_sum() : b.credit;
    }
    case MsgKind::PaN:
      return std::get<msg::PaN>(m.body).in_credit;
    case MsgKind::SpecialForward: {
      const auto& b = std::get<msg::SpecialForward>(m.body);
      return b.ledger ? b.credit + b.ledger->moved_sum() : b.credit;
    }
    case MsgKind::Refund:
      return std::get<msg::Refund>(m.body).credit;
    default:
      return Credit();
  }
}

}  // namespace tcran
