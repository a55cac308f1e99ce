from stackcnn.main import main

main()
