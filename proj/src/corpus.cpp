#include <array>
#include <span>
#include <string>

#include "semcom/vocab.hpp"

namespace semcom::codec {

namespace {

// 25 English-like and 25 French-like lines, whitespace tokenized.
const std::array<std::string, 50> kCorpus = {
    "the sensor sends a short report",
    "a device joins the network today",
    "the gateway reads the channel state",
    "noise drops when the link is clear",
    "the node shares its model update",
    "every device keeps a local copy",
    "the base station schedules the round",
    "a clean link carries more meaning",
    "the receiver decodes the short message",
    "semantic features travel over the air",
    "the ledger records every model update",
    "devices agree on the latest block",
    "a small knowledge base saves bandwidth",
    "the encoder maps words to symbols",
    "fading makes the channel less reliable",
    "the network adapts to new tasks",
    "privacy noise hides the raw data",
    "the decoder recovers the sent meaning",
    "a strong signal needs less power",
    "the update round ends with consensus",
    "each trusted node signs its report",
    "shared knowledge guides the decoder",
    "the channel adds noise to symbols",
    "short messages keep the queue small",
    "the system learns from every round",
    "le capteur envoie un petit rapport",
    "un appareil rejoint le reseau entier",
    "la passerelle lit le canal libre",
    "le bruit baisse quand le lien est clair",
    "le noeud partage son modele local",
    "chaque appareil garde une copie locale",
    "la station planifie le prochain tour",
    "un lien propre porte plus de sens",
    "le recepteur decode le message court",
    "les traits semantiques passent par le canal",
    "le registre garde chaque mise a jour",
    "les appareils valident le dernier bloc",
    "une petite base de savoir suffit",
    "le codeur envoie des symboles utiles",
    "le canal devient moins fiable ici",
    "le reseau s adapte aux taches",
    "le bruit prive cache les donnees",
    "le decodeur retrouve le sens envoye",
    "un signal fort demande moins de puissance",
    "le tour finit par un accord",
    "chaque noeud signe son propre rapport",
    "le savoir partage guide le decodeur",
    "le canal ajoute du bruit aux symboles",
    "les messages courts restent toujours rapides",
    "le systeme apprend a chaque tour",
};

}  // namespace

std::span<const std::string> bundled_corpus() {
  return {kCorpus.data(), kCorpus.size()};
}

}  // namespace semcom::codec
