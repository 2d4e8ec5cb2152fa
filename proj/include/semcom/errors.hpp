#pragma once

#include <stdexcept>
#include <string>

namespace semcom {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SEMCOM_DEFINE_ERROR(Name)                  \
  class Name : public Error {                      \
   public:                                         \
    using Error::Error;                            \
  }

// Byte-level decoding of any canonical format.
SEMCOM_DEFINE_ERROR(DecodeError);

// signal
SEMCOM_DEFINE_ERROR(ZeroPowerError);
SEMCOM_DEFINE_ERROR(InvalidRicianFactorError);
SEMCOM_DEFINE_ERROR(SingularGainError);

// codec
SEMCOM_DEFINE_ERROR(UnknownTokenError);
SEMCOM_DEFINE_ERROR(PrefixTooSmallError);
SEMCOM_DEFINE_ERROR(ShapeMismatchError);
SEMCOM_DEFINE_ERROR(EmptyKbError);
SEMCOM_DEFINE_ERROR(OutOfRangeError);
SEMCOM_DEFINE_ERROR(NonFiniteLossError);
SEMCOM_DEFINE_ERROR(EmptySentenceError);
SEMCOM_DEFINE_ERROR(MalformedBlobError);

// auth
SEMCOM_DEFINE_ERROR(LengthMismatchError);
SEMCOM_DEFINE_ERROR(InvalidKeyError);
SEMCOM_DEFINE_ERROR(SignatureInvalidError);
SEMCOM_DEFINE_ERROR(PrematureReleaseError);

// ledger
SEMCOM_DEFINE_ERROR(DuplicateIdError);
SEMCOM_DEFINE_ERROR(EmptyInputError);
SEMCOM_DEFINE_ERROR(NotProposerError);
SEMCOM_DEFINE_ERROR(NoValidTxsError);
SEMCOM_DEFINE_ERROR(QuorumNotReachedError);
SEMCOM_DEFINE_ERROR(NothingCommittedError);

// dp
SEMCOM_DEFINE_ERROR(NonConvergenceError);
SEMCOM_DEFINE_ERROR(BudgetOutOfRangeError);
SEMCOM_DEFINE_ERROR(UnachievableError);
SEMCOM_DEFINE_ERROR(EmptyListError);

// config
SEMCOM_DEFINE_ERROR(ParseError);

#undef SEMCOM_DEFINE_ERROR

}  // namespace semcom
