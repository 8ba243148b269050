from cryptography.fernet import Fernet

from reworkd_platform.services.security import EncryptionService


def test_encrypt_decrypt():
    key = Fernet.generate_key()
    service = EncryptionService(key)

    original_text = "Hello, world!"
    encrypted = service.encrypt(original_text)
    decrypted = service.decrypt(encrypted)

    assert original_text == decrypted
